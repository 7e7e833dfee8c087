#pragma once

#include <string>

#include "stabledyn/learn.hpp"

namespace stabledyn {

// Versioned JSON serialization ("stable-model/1"). Keys are emitted sorted
// and floats in shortest round-trip form, so save(load(save(m))) is byte
// identical to save(m).
void save_model_json(const std::string &path, const StableModel &model);
StableModel load_model_json(const std::string &path);

}  // namespace stabledyn
