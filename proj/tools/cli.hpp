#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rlab/nn.hpp"

namespace rlab::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInvalid = 1, kCheckFailed = 2 };

// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SnrPoint {
  double snr = 0.0;
  double accuracy = 0.0;  // median over noise seeds
};

// Accuracy on gaussian_snr(data, snr, ·) per value, median over `noise_seeds`
// seeds derived from `seed`.
std::vector<SnrPoint> snr_sweep(const MlpModel& model, const Dataset& data, std::span<const double> snrs,
                                std::uint64_t seed, std::size_t noise_seeds = 3);

struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> config;  // every resolved option
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::map<std::string, std::string> input_digests;  // path → SHA-256 hex
  std::string started_at;
  std::string finished_at;

  std::string to_json() const;
};

std::string sha256_hex(const std::filesystem::path& path);

// "1,2.5,inf" → {1, 2.5, ∞}.
std::vector<double> parse_real_list(const std::string& text);

}  // namespace rlab::cli
