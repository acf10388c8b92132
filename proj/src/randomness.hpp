#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fd2k {

using BitSequence = std::vector<std::uint8_t>;
using Bits = std::span<const std::uint8_t>;

inline constexpr double kSignificance = 0.01;

struct TestReport {
  std::string test_name;
  std::vector<double> p_values;  // one per state/mode; may be filled even when inapplicable
  double reported_p = 0.0;       // min over p_values
  bool pass = false;             // applicable && reported_p >= 0.01
  bool applicable = false;
  std::string reason;            // why the test does not apply
};

// SP 800-22 statistics for the eight tests reported for FD2K keystreams.
TestReport monobit_frequency(Bits seq);
TestReport runs(Bits seq);
TestReport dft_spectral(Bits seq);
TestReport non_overlapping_template(Bits seq, std::string_view templ = "000000001", int blocks = 8);
TestReport approximate_entropy(Bits seq, int m = 2);
TestReport cumulative_sums(Bits seq);
TestReport random_excursions(Bits seq, int min_cycles = 500);
TestReport random_excursions_variant(Bits seq, int min_cycles = 500);

// All eight, in report order: monobit, runs, DFT, non-overlapping template, approximate
// entropy, cumulative sums, random excursions, random excursions variant.
std::vector<TestReport> run_suite(Bits seq);

// Number of zero-returning cycles J of the +/-1 random walk (a trailing partial cycle counts).
std::size_t excursion_cycles(Bits seq);

// ASCII '0'/'1'; whitespace is ignored, anything else is an error.
BitSequence read_bitstream(const std::filesystem::path& path);
void write_bitstream(const std::filesystem::path& path, Bits seq);
BitSequence parse_bitstring(std::string_view text);

// CSV `test,p_value,pass,applicable`.
std::string reports_csv(const std::vector<TestReport>& reports);

}  // namespace fd2k
