#include "config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "errors.hpp"
#include "text.hpp"

namespace fd2k {

namespace {

// A parsed TOML scalar. Only the subset used by run configs is supported: strings,
// integers, floats and booleans under at most one level of [table].
struct Literal {
  enum class Kind { string, number, boolean, bare } kind;
  std::string text;
};

struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const Literal&)> set;
  bool quoted;
};

double as_double(const Literal& v, const std::string& key) {
  std::string digits;
  for (char c : v.text)
    if (c != '_') digits.push_back(c);
  auto d = text::parse_double(digits);
  if (v.kind == Literal::Kind::string || !d) throw ConfigError("config: '" + key + "' expects a number, got '" + v.text + "'");
  return *d;
}

long long as_int(const Literal& v, const std::string& key) {
  std::string digits;
  for (char c : v.text)
    if (c != '_') digits.push_back(c);
  auto i = text::parse_int(digits);
  if (v.kind == Literal::Kind::string || !i) throw ConfigError("config: '" + key + "' expects an integer, got '" + v.text + "'");
  return *i;
}

bool as_bool(const Literal& v, const std::string& key) {
  if (v.text == "true") return true;
  if (v.text == "false") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v.text + "'");
}

std::string fmt(double v) { return text::format_double(v); }

template <typename Field>
Entry real(std::string key, Field field) {
  return Entry{key, [field](const RunConfig& c) { return fmt(field(const_cast<RunConfig&>(c))); },
               [field, key](RunConfig& c, const Literal& v) { field(c) = as_double(v, key); }, false};
}

template <typename Field>
Entry integer(std::string key, Field field) {
  return Entry{key, [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); },
               [field, key](RunConfig& c, const Literal& v) {
                 using T = std::remove_reference_t<decltype(field(c))>;
                 field(c) = static_cast<T>(as_int(v, key));
               },
               false};
}

template <typename Field>
Entry string(std::string key, Field field) {
  return Entry{key, [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)); },
               [field](RunConfig& c, const Literal& v) { field(c) = v.text; }, true};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      // Hyperparameter symbols.
      Entry{"M", [](const RunConfig& c) { return std::to_string(c.train.M); },
            [](RunConfig& c, const Literal& v) { c.train.M = c.scenario.M = static_cast<int>(as_int(v, "M")); }, false},
      Entry{"T", [](const RunConfig& c) { return std::to_string(c.train.T); },
            [](RunConfig& c, const Literal& v) { c.train.T = c.scenario.T = static_cast<int>(as_int(v, "T")); }, false},
      real("gamma", [](RunConfig& c) -> double& { return c.train.gamma; }),
      integer("n", [](RunConfig& c) -> int& { return c.train.batch_size; }),
      integer("N_mem", [](RunConfig& c) -> int& { return c.train.memory_capacity; }),
      integer("e_max", [](RunConfig& c) -> int& { return c.train.max_epochs; }),
      real("epsilon", [](RunConfig& c) -> double& { return c.train.epsilon; }),
      real("rho", [](RunConfig& c) -> double& { return c.train.rho; }),
      integer("E", [](RunConfig& c) -> int& { return c.train.federated_interval; }),
      real("lambda", [](RunConfig& c) -> double& { return c.train.lambda; }),
      // Training knobs the table leaves open.
      real("noise_decay", [](RunConfig& c) -> double& { return c.train.noise_decay; }),
      real("noise_min", [](RunConfig& c) -> double& { return c.train.noise_min; }),
      real("actor_lr", [](RunConfig& c) -> double& { return c.train.actor_lr; }),
      real("critic_lr", [](RunConfig& c) -> double& { return c.train.critic_lr; }),
      integer("hidden_layers", [](RunConfig& c) -> int& { return c.train.hidden_layers; }),
      integer("hidden_units", [](RunConfig& c) -> int& { return c.train.hidden_units; }),
      Entry{"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const Literal& v) {
              auto s = as_int(v, "seed");
              if (s < 0) throw ConfigError("config: seed must be non-negative");
              c.seed = static_cast<std::uint64_t>(s);
            },
            false},
      string("output_dir", [](RunConfig& c) -> std::string& { return c.output_dir; }),
      string("federated_dir", [](RunConfig& c) -> std::string& { return c.federated_dir; }),
      string("trace_file", [](RunConfig& c) -> std::string& { return c.trace_file; }),
      integer("checkpoint_every", [](RunConfig& c) -> int& { return c.checkpoint_every; }),

      string("scenario.alice_node", [](RunConfig& c) -> std::string& { return c.scenario.alice_node; }),
      string("scenario.bob_node", [](RunConfig& c) -> std::string& { return c.scenario.bob_node; }),
      string("scenario.eve_node", [](RunConfig& c) -> std::string& { return c.scenario.eve_node; }),
      real("scenario.sample_interval_s", [](RunConfig& c) -> double& { return c.scenario.sample_interval_s; }),

      real("synth.period_s", [](RunConfig& c) -> double& { return c.synth.period_s; }),
      real("synth.diurnal_amplitude", [](RunConfig& c) -> double& { return c.synth.diurnal_amplitude; }),
      real("synth.sigma_shared", [](RunConfig& c) -> double& { return c.synth.sigma_shared; }),
      real("synth.sigma_local", [](RunConfig& c) -> double& { return c.synth.sigma_local; }),
      real("synth.eve_decorrelation", [](RunConfig& c) -> double& { return c.synth.eve_decorrelation; }),
      real("synth.alice_gain", [](RunConfig& c) -> double& { return c.synth.alice.gain; }),
      real("synth.alice_offset", [](RunConfig& c) -> double& { return c.synth.alice.offset; }),
      real("synth.bob_gain", [](RunConfig& c) -> double& { return c.synth.bob.gain; }),
      real("synth.bob_offset", [](RunConfig& c) -> double& { return c.synth.bob.offset; }),
      real("synth.eve_gain", [](RunConfig& c) -> double& { return c.synth.eve.gain; }),
      real("synth.eve_offset", [](RunConfig& c) -> double& { return c.synth.eve.offset; }),

      integer("eval.episodes", [](RunConfig& c) -> int& { return c.eval.episodes; }),
      integer("eval.min_bits", [](RunConfig& c) -> std::size_t& { return c.eval.min_bits; }),
      Entry{"eval.extend_for_excursions",
            [](const RunConfig& c) { return std::string(c.eval.extend_for_excursions ? "true" : "false"); },
            [](RunConfig& c, const Literal& v) { c.eval.extend_for_excursions = as_bool(v, "eval.extend_for_excursions"); },
            false},
      integer("eval.max_bits", [](RunConfig& c) -> std::size_t& { return c.eval.max_bits; }),
      integer("eval.min_cycles", [](RunConfig& c) -> int& { return c.eval.min_cycles; }),
  };
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries())
    if (e.key == key) return e;
  throw ConfigError("config: unknown key '" + key + "'");
}

Literal parse_literal(std::string_view raw, const std::string& where) {
  auto s = text::trim(raw);
  if (s.empty()) throw ConfigError(where + ": missing value");
  if (s.front() == '"' || s.front() == '\'') {
    const char quote = s.front();
    std::string out;
    std::size_t i = 1;
    for (; i < s.size() && s[i] != quote; ++i) {
      if (quote == '"' && s[i] == '\\' && i + 1 < s.size()) {
        ++i;
        switch (s[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          default: out.push_back(s[i]);
        }
      } else {
        out.push_back(s[i]);
      }
    }
    if (i >= s.size()) throw ConfigError(where + ": unterminated string");
    if (!text::trim(s.substr(i + 1)).empty()) throw ConfigError(where + ": trailing characters after string");
    return {Literal::Kind::string, out};
  }
  if (s == "true" || s == "false") return {Literal::Kind::boolean, std::string(s)};
  return {Literal::Kind::number, std::string(s)};
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) in_string = false;
    } else if (c == '"' || c == '\'') {
      in_string = true;
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  scenario.validate();
  synth.validate();
  if (train.M != scenario.M || train.T != scenario.T) throw ConfigError("config: M/T disagree between sections");
  if (eval.episodes < 1) throw ConfigError("config: eval.episodes must be >= 1");
  if (eval.min_cycles < 1) throw ConfigError("config: eval.min_cycles must be >= 1");
  if (eval.max_bits < eval.min_bits) throw ConfigError("config: eval.max_bits must be >= eval.min_bits");
  if (checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be >= 0");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& entry = find_entry(key);
  Literal lit = parse_literal(value, "config key '" + key + "'");
  // Bare text is accepted for string keys on the command line.
  if (entry.quoted && lit.kind != Literal::Kind::string) lit.kind = Literal::Kind::bare;
  entry.set(*this, lit);
}

std::string RunConfig::get(const std::string& key) const { return find_entry(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.key);
  return out;
}

std::string RunConfig::to_toml() const {
  std::ostringstream out;
  std::string section;
  for (const auto& e : entries()) {
    auto dot = e.key.find('.');
    std::string table = dot == std::string::npos ? "" : e.key.substr(0, dot);
    std::string name = dot == std::string::npos ? e.key : e.key.substr(dot + 1);
    if (table != section) {
      out << "\n[" << table << "]\n";
      section = table;
    }
    const auto value = e.get(*this);
    out << name << " = " << (e.quoted ? quote(value) : value) << "\n";
  }
  return out.str();
}

void RunConfig::merge_toml(const std::string& text_in, const std::string& origin) {
  std::istringstream in(text_in);
  std::string line;
  std::string table;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    auto s = std::string(text::trim(strip_comment(line)));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ConfigError(where + ": malformed table header");
      table = std::string(text::trim(std::string_view(s).substr(1, s.size() - 2)));
      if (table != "scenario" && table != "synth" && table != "eval")
        throw ConfigError(where + ": unknown table [" + table + "]");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string name(text::trim(std::string_view(s).substr(0, eq)));
    if (name.empty()) throw ConfigError(where + ": empty key");
    const std::string key = table.empty() ? name : table + "." + name;
    const Entry* entry = nullptr;
    for (const auto& e : entries())
      if (e.key == key) entry = &e;
    if (!entry) throw ConfigError(where + ": unknown key '" + key + "'");
    Literal lit = parse_literal(std::string_view(s).substr(eq + 1), where);
    if (entry->quoted && lit.kind != Literal::Kind::string)
      throw ConfigError(where + ": '" + key + "' expects a quoted string");
    try {
      entry->set(*this, lit);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

RunConfig RunConfig::from_toml(const std::string& text_in, const std::string& origin) {
  RunConfig c;
  c.merge_toml(text_in, origin);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_toml(buffer.str(), path.string());
}

}  // namespace fd2k
