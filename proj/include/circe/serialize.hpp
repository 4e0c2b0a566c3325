#pragma once

#include <string>

#include "circe/krr_loo.hpp"
#include "circe/mlp.hpp"

namespace circe {

/// Versioned JSON blobs. Doubles are written in shortest round-trip form, so
/// load(save(x)) reproduces x bitwise. Malformed input is a ConfigError.
std::string save_cme(const CmeModel& model);
CmeModel load_cme(const std::string& text);

std::string save_mlp(const MlpModel& model);
MlpModel load_mlp(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace circe
