#include "randomness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "errors.hpp"
#include "special_functions.hpp"
#include "text.hpp"

namespace fd2k {

namespace {

using special::erfc;
using special::igamc;
using special::normal_cdf;

TestReport inapplicable(std::string name, std::string reason) {
  TestReport r;
  r.test_name = std::move(name);
  r.reason = std::move(reason);
  return r;
}

TestReport finish(std::string name, std::vector<double> p_values, bool applicable = true, std::string reason = {}) {
  TestReport r;
  r.test_name = std::move(name);
  for (auto& p : p_values) p = std::clamp(p, 0.0, 1.0);
  r.p_values = std::move(p_values);
  r.reported_p = r.p_values.empty() ? 0.0 : *std::min_element(r.p_values.begin(), r.p_values.end());
  r.applicable = applicable && !r.p_values.empty();
  r.pass = r.applicable && r.reported_p >= kSignificance;
  r.reason = std::move(reason);
  return r;
}

void check_binary(Bits seq) {
  for (auto b : seq)
    if (b > 1) throw FormatError("bit sequence contains a value other than 0/1");
}

std::string too_short(std::size_t n, std::size_t need) {
  return "sequence length " + std::to_string(n) + " below minimum " + std::to_string(need);
}

// C-style truncating division, as in the reference suite's loop bounds.
long long trunc_div(long long a, long long b) { return a / b; }

}  // namespace

TestReport monobit_frequency(Bits seq) {
  const std::string name = "Monobit Frequency";
  check_binary(seq);
  const auto n = seq.size();
  if (n < 100) return inapplicable(name, too_short(n, 100));
  long long sum = 0;
  for (auto b : seq) sum += b ? 1 : -1;
  const double s_obs = std::fabs(static_cast<double>(sum)) / std::sqrt(static_cast<double>(n));
  return finish(name, {erfc(s_obs / std::numbers::sqrt2)});
}

TestReport runs(Bits seq) {
  const std::string name = "Runs";
  check_binary(seq);
  const auto n = seq.size();
  if (n < 100) return inapplicable(name, too_short(n, 100));
  const double dn = static_cast<double>(n);
  const double pi = static_cast<double>(std::count(seq.begin(), seq.end(), 1)) / dn;
  if (std::fabs(pi - 0.5) >= 2.0 / std::sqrt(dn)) return inapplicable(name, "frequency prerequisite failed");
  std::size_t v_obs = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) v_obs += seq[k] != seq[k + 1] ? 1 : 0;
  const double num = std::fabs(static_cast<double>(v_obs) - 2.0 * dn * pi * (1.0 - pi));
  const double den = 2.0 * std::sqrt(2.0 * dn) * pi * (1.0 - pi);
  return finish(name, {erfc(num / den)});
}

TestReport dft_spectral(Bits seq) {
  const std::string name = "Discrete Fourier Transform";
  check_binary(seq);
  const std::size_t n = seq.size() - seq.size() % 2;
  if (n < 100) return inapplicable(name, too_short(seq.size(), 100));

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = seq[i] ? 1.0 : -1.0;
  std::vector<std::complex<double>> spectrum(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), x.data(),
                                        reinterpret_cast<fftw_complex*>(spectrum.data()), FFTW_ESTIMATE);
  if (!plan) throw Error("dft_spectral: FFTW plan creation failed");
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  const double dn = static_cast<double>(n);
  const double threshold = std::sqrt(std::log(1.0 / 0.05) * dn);
  std::size_t below = 0;
  for (std::size_t k = 0; k < n / 2; ++k) below += std::abs(spectrum[k]) < threshold ? 1 : 0;
  const double expected = 0.95 * dn / 2.0;
  const double d = (static_cast<double>(below) - expected) / std::sqrt(dn * 0.95 * 0.05 / 4.0);
  return finish(name, {erfc(std::fabs(d) / std::numbers::sqrt2)});
}

TestReport non_overlapping_template(Bits seq, std::string_view templ, int blocks) {
  const std::string name = "Non Overlapping Template";
  check_binary(seq);
  const auto B = parse_bitstring(templ);
  const auto m = B.size();
  if (m == 0 || blocks < 1) throw ConfigError("non_overlapping_template: empty template or no blocks");
  const auto n = seq.size();
  const std::size_t M = n / static_cast<std::size_t>(blocks);
  if (M < m) return inapplicable(name, too_short(n, m * static_cast<std::size_t>(blocks)));

  const double dM = static_cast<double>(M);
  const double dm = static_cast<double>(m);
  const double mu = (dM - dm + 1.0) / std::pow(2.0, dm);
  const double var = dM * (1.0 / std::pow(2.0, dm) - (2.0 * dm - 1.0) / std::pow(2.0, 2.0 * dm));
  double chi2 = 0.0;
  for (int i = 0; i < blocks; ++i) {
    const auto* block = seq.data() + static_cast<std::size_t>(i) * M;
    std::size_t hits = 0;
    std::size_t j = 0;
    while (j + m <= M) {
      if (std::equal(B.begin(), B.end(), block + j)) {
        ++hits;
        j += m;
      } else {
        ++j;
      }
    }
    chi2 += (static_cast<double>(hits) - mu) * (static_cast<double>(hits) - mu) / var;
  }
  return finish(name, {igamc(blocks / 2.0, chi2 / 2.0)});
}

TestReport approximate_entropy(Bits seq, int m) {
  const std::string name = "Approximate Entropy";
  check_binary(seq);
  const auto n = seq.size();
  if (m < 1 || m > 20) throw ConfigError("approximate_entropy: block length out of range");
  // Recommended m < floor(log2 n) - 5.
  const std::size_t min_n = std::size_t{1} << (m + 6);
  if (n < min_n) return inapplicable(name, too_short(n, min_n));

  const double dn = static_cast<double>(n);
  auto phi = [&](int block) {
    std::vector<std::size_t> counts(std::size_t{1} << block, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t v = 0;
      for (int k = 0; k < block; ++k) v = (v << 1) | seq[(i + static_cast<std::size_t>(k)) % n];
      ++counts[v];
    }
    double sum = 0.0;
    for (auto c : counts)
      if (c > 0) sum += static_cast<double>(c) * std::log(static_cast<double>(c) / dn);
    return sum / dn;
  };
  const double apen = phi(m) - phi(m + 1);
  const double chi2 = 2.0 * dn * (std::log(2.0) - apen);
  return finish(name, {igamc(std::pow(2.0, m - 1), chi2 / 2.0)});
}

namespace {

double cusum_p(long long n, long long z) {
  const double dn = static_cast<double>(n);
  const double sqn = std::sqrt(dn);
  const double dz = static_cast<double>(z);
  double sum1 = 0.0;
  for (long long k = trunc_div(trunc_div(-n, z) + 1, 4); k <= trunc_div(trunc_div(n, z) - 1, 4); ++k)
    sum1 += normal_cdf((4.0 * k + 1.0) * dz / sqn) - normal_cdf((4.0 * k - 1.0) * dz / sqn);
  double sum2 = 0.0;
  for (long long k = trunc_div(trunc_div(-n, z) - 3, 4); k <= trunc_div(trunc_div(n, z) - 1, 4); ++k)
    sum2 += normal_cdf((4.0 * k + 3.0) * dz / sqn) - normal_cdf((4.0 * k + 1.0) * dz / sqn);
  return 1.0 - sum1 + sum2;
}

}  // namespace

TestReport cumulative_sums(Bits seq) {
  const std::string name = "Cumulative Sums";
  check_binary(seq);
  const auto n = static_cast<long long>(seq.size());
  if (n < 100) return inapplicable(name, too_short(seq.size(), 100));
  long long s = 0, sup = 0, inf = 0;
  for (auto b : seq) {
    s += b ? 1 : -1;
    sup = std::max(sup, s);
    inf = std::min(inf, s);
  }
  const long long z_forward = std::max(sup, -inf);
  const long long z_backward = std::max(sup - s, s - inf);
  return finish(name, {cusum_p(n, z_forward), cusum_p(n, z_backward)});
}

std::size_t excursion_cycles(Bits seq) {
  std::size_t cycles = 0;
  long long s = 0;
  for (auto b : seq) {
    s += b ? 1 : -1;
    if (s == 0) ++cycles;
  }
  if (!seq.empty() && s != 0) ++cycles;
  return cycles;
}

namespace {

// Per-cycle visit counts for states -range..range (index state + range).
struct Excursions {
  std::size_t cycles = 0;
  std::vector<std::array<std::size_t, 6>> nu;  // nu[state][min(visits, 5)]
  std::vector<std::size_t> total_visits;
};

Excursions walk_excursions(Bits seq, int range) {
  Excursions ex;
  const auto width = static_cast<std::size_t>(2 * range + 1);
  ex.nu.assign(width, {0, 0, 0, 0, 0, 0});
  ex.total_visits.assign(width, 0);
  std::vector<std::size_t> in_cycle(width, 0);
  auto close_cycle = [&] {
    ++ex.cycles;
    for (std::size_t i = 0; i < width; ++i) {
      ++ex.nu[i][std::min<std::size_t>(in_cycle[i], 5)];
      in_cycle[i] = 0;
    }
  };
  long long s = 0;
  for (auto b : seq) {
    s += b ? 1 : -1;
    if (s == 0) {
      close_cycle();
    } else if (s >= -range && s <= range) {
      const auto idx = static_cast<std::size_t>(s + range);
      ++in_cycle[idx];
      ++ex.total_visits[idx];
    }
  }
  if (!seq.empty() && s != 0) close_cycle();
  return ex;
}

double excursion_probability(int k, int x) {
  const double ax = std::fabs(static_cast<double>(x));
  const double q = 1.0 - 1.0 / (2.0 * ax);
  if (k == 0) return q;
  if (k < 5) return 1.0 / (4.0 * ax * ax) * std::pow(q, k - 1);
  return 1.0 / (2.0 * ax) * std::pow(q, 4);
}

std::string cycles_reason(std::size_t J, int min_cycles) {
  return "only " + std::to_string(J) + " cycles, need " + std::to_string(min_cycles);
}

}  // namespace

TestReport random_excursions(Bits seq, int min_cycles) {
  const std::string name = "Random Excursion";
  check_binary(seq);
  const auto ex = walk_excursions(seq, 4);
  const auto J = ex.cycles;
  if (J == 0) return inapplicable(name, "no cycles");
  const double dJ = static_cast<double>(J);
  std::vector<double> p;
  for (int x : {-4, -3, -2, -1, 1, 2, 3, 4}) {
    const auto& counts = ex.nu[static_cast<std::size_t>(x + 4)];
    double chi2 = 0.0;
    for (int k = 0; k <= 5; ++k) {
      const double expected = dJ * excursion_probability(k, x);
      const double diff = static_cast<double>(counts[static_cast<std::size_t>(k)]) - expected;
      chi2 += diff * diff / expected;
    }
    p.push_back(igamc(2.5, chi2 / 2.0));
  }
  const bool enough = J >= static_cast<std::size_t>(min_cycles);
  return finish(name, std::move(p), enough, enough ? "" : cycles_reason(J, min_cycles));
}

TestReport random_excursions_variant(Bits seq, int min_cycles) {
  const std::string name = "Random Excursion Variant";
  check_binary(seq);
  const auto ex = walk_excursions(seq, 9);
  const auto J = ex.cycles;
  if (J == 0) return inapplicable(name, "no cycles");
  const double dJ = static_cast<double>(J);
  std::vector<double> p;
  for (int x = -9; x <= 9; ++x) {
    if (x == 0) continue;
    const double xi = static_cast<double>(ex.total_visits[static_cast<std::size_t>(x + 9)]);
    const double ax = std::fabs(static_cast<double>(x));
    p.push_back(erfc(std::fabs(xi - dJ) / std::sqrt(2.0 * dJ * (4.0 * ax - 2.0))));
  }
  const bool enough = J >= static_cast<std::size_t>(min_cycles);
  return finish(name, std::move(p), enough, enough ? "" : cycles_reason(J, min_cycles));
}

std::vector<TestReport> run_suite(Bits seq) {
  return {monobit_frequency(seq),   runs(seq),         dft_spectral(seq),      non_overlapping_template(seq),
          approximate_entropy(seq), cumulative_sums(seq), random_excursions(seq), random_excursions_variant(seq)};
}

BitSequence parse_bitstring(std::string_view text) {
  BitSequence bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c == '0' || c == '1') bits.push_back(static_cast<std::uint8_t>(c - '0'));
    else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    else throw FormatError(std::string("bitstream: unexpected character '") + c + "'");
  }
  return bits;
}

BitSequence read_bitstream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bitstream " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_bitstring(buffer.str());
}

void write_bitstream(const std::filesystem::path& path, Bits seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write bitstream " + path.string());
  std::string line;
  line.reserve(seq.size() + 1);
  for (auto b : seq) line.push_back(b ? '1' : '0');
  line.push_back('\n');
  out << line;
  if (!out) throw IoError("failed writing bitstream " + path.string());
}

std::string reports_csv(const std::vector<TestReport>& reports) {
  std::ostringstream out;
  out << "test,p_value,pass,applicable\n";
  for (const auto& r : reports) {
    out << r.test_name << ',' << (r.p_values.empty() ? std::string("NA") : text::format_double(r.reported_p)) << ','
        << (r.pass ? "true" : "false") << ',' << (r.applicable ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace fd2k
