#pragma once

#include <string>

#include "qfield/models.hpp"

namespace qfield {

/// Strict JSON codec for field models; unknown keys are errors.
std::string model_to_json(const FieldModel& model);
FieldModel model_from_json(const std::string& text);

FieldModel load_model(const std::string& path);
void save_model(const FieldModel& model, const std::string& path);

}  // namespace qfield
