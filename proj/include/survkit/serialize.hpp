#pragma once

// Versioned text container for fitted models. One format for all five model
// families; every number is written in shortest round-trip form, so
// write-then-read reproduces the model bit for bit.

#include <iosfwd>
#include <string>

#include "survkit/pipeline.hpp"

namespace survkit::serialize {

inline constexpr int kFormatVersion = 1;

void write_model(const pipeline::FittedModel& model, std::ostream& out);

// Accepts exactly the documents write_model produces (any supported
// version). Malformed input raises BadFormat with the offending line.
pipeline::FittedModel read_model(std::istream& in);

// File wrappers; IoError when the path cannot be opened.
void save_model(const pipeline::FittedModel& model, const std::string& path);
pipeline::FittedModel load_model(const std::string& path);

}  // namespace survkit::serialize
