#include "qamc/sk_instance.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qamc/errors.hpp"
#include "qamc/rng.hpp"

namespace qamc {

namespace {

void check_spin_count(unsigned n) {
  if (n < kMinSpins || n > kMaxSpins) {
    throw std::out_of_range("spin count " + std::to_string(n) + " outside [" + std::to_string(kMinSpins) + ", " +
                            std::to_string(kMaxSpins) +
                            "]: every analysis enumerates all 2^n states and builds dense 2^n x 2^n matrices");
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format value");
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Splits on whitespace.
std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <class T>
T parse_number(std::string_view tok, std::size_t line, const char* field) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(std::string("bad ") + field + " '" + std::string(tok) + "'", line);
  }
  return value;
}

}  // namespace

std::vector<int> to_spins(SpinConfig cfg, unsigned n) {
  std::vector<int> s(n);
  for (unsigned i = 0; i < n; ++i) s[i] = cfg.spin(i);
  return s;
}

SpinConfig from_spins(std::span<const int> spins) {
  std::uint32_t index = 0;
  for (std::size_t i = 0; i < spins.size(); ++i) {
    if (spins[i] == -1) {
      index |= std::uint32_t{1} << i;
    } else if (spins[i] != 1) {
      throw std::invalid_argument("spin values must be +1 or -1");
    }
  }
  return SpinConfig{index};
}

std::size_t coupling_count(unsigned n) { return std::size_t{n} * (n - 1) / 2; }

std::size_t coupling_offset(unsigned n, unsigned i, unsigned j) {
  // Row i of the strict upper triangle starts after rows 0..i-1.
  return std::size_t{i} * (2 * n - i - 1) / 2 + (j - i - 1);
}

std::string make_instance_id(unsigned n, std::uint64_t seed) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "sk-n%u-%016llx", n, static_cast<unsigned long long>(seed));
  return buf;
}

SKInstance::SKInstance(unsigned n, std::vector<double> couplings, std::vector<double> fields, std::uint64_t seed)
    : n_(n), couplings_(std::move(couplings)), fields_(std::move(fields)), seed_(seed), id_(make_instance_id(n, seed)) {
  check_spin_count(n);
  if (couplings_.size() != coupling_count(n)) {
    throw ValidationError("expected " + std::to_string(coupling_count(n)) + " couplings for n=" + std::to_string(n) +
                          ", got " + std::to_string(couplings_.size()));
  }
  if (fields_.size() != n) {
    throw ValidationError("expected " + std::to_string(n) + " fields, got " + std::to_string(fields_.size()));
  }
  for (double v : couplings_)
    if (!std::isfinite(v)) throw ValidationError("non-finite coupling");
  for (double v : fields_)
    if (!std::isfinite(v)) throw ValidationError("non-finite field");
}

double SKInstance::coupling(unsigned i, unsigned j) const {
  if (i == j) throw std::invalid_argument("no self-coupling");
  if (i > j) std::swap(i, j);
  return couplings_[coupling_offset(n_, i, j)];
}

SKInstance generate_instance(unsigned n, std::uint64_t seed) {
  check_spin_count(n);
  Stream stream = Stream::derive(seed, {n});
  std::vector<double> couplings(coupling_count(n));
  std::vector<double> fields(n);
  for (auto& j : couplings) j = stream.normal();
  for (auto& h : fields) h = stream.normal();
  return SKInstance(n, std::move(couplings), std::move(fields), seed);
}

double energy(const SKInstance& inst, SpinConfig cfg) {
  const unsigned n = inst.n();
  const auto J = inst.couplings();
  double e = 0.0;
  std::size_t k = 0;
  for (unsigned i = 0; i < n; ++i) {
    const int si = cfg.spin(i);
    for (unsigned j = i + 1; j < n; ++j) e += J[k++] * si * cfg.spin(j);
    e += inst.field(i) * si;
  }
  return e;
}

std::vector<double> all_energies(const SKInstance& inst) {
  // Built one site at a time: the table for sites 0..m-1 is extended to
  // site m by E' = E + s_m (h_m + sum_{i<m} J_im s_i) for both s_m = +1, -1.
  const unsigned n = inst.n();
  std::vector<double> e(state_count(n), 0.0);
  std::vector<double> local(state_count(n), 0.0);
  for (unsigned m = 0; m < n; ++m) {
    const std::size_t half = state_count(m);
    for (std::size_t k = 0; k < half; ++k) {
      double f = inst.field(m);
      for (unsigned i = 0; i < m; ++i) f += inst.coupling(i, m) * ((k >> i) & 1U ? -1.0 : 1.0);
      local[k] = f;
    }
    for (std::size_t k = 0; k < half; ++k) {
      const double base = e[k];
      e[k] = base + local[k];
      e[k + half] = base - local[k];
    }
  }
  return e;
}

std::string format_instance(const SKInstance& inst) {
  std::ostringstream out;
  out << "# Sherrington-Kirkpatrick instance " << inst.instance_id() << "\n";
  out << "n=" << inst.n() << "\n";
  out << "seed=" << inst.seed() << "\n";
  out << "couplings:\n";
  for (unsigned i = 0; i < inst.n(); ++i)
    for (unsigned j = i + 1; j < inst.n(); ++j)
      out << i + 1 << ' ' << j + 1 << ' ' << format_double(inst.coupling(i, j)) << "\n";
  out << "fields:\n";
  for (unsigned i = 0; i < inst.n(); ++i) out << i + 1 << ' ' << format_double(inst.field(i)) << "\n";
  return out.str();
}

SKInstance parse_instance(const std::string& text) {
  enum class Section { header, couplings, fields };
  Section section = Section::header;
  long long n = -1;
  std::uint64_t seed = 0;
  bool have_seed = false;
  std::vector<double> couplings;
  std::vector<double> fields;
  std::vector<bool> seen_coupling, seen_field;
  std::size_t line_no = 0;

  auto require_n = [&](std::size_t line) {
    if (n < 0) throw ParseError("data before 'n=' header", line);
  };

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (line == "couplings:") {
      require_n(line_no);
      section = Section::couplings;
      continue;
    }
    if (line == "fields:") {
      require_n(line_no);
      section = Section::fields;
      continue;
    }

    if (section == Section::header) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key=value header", line_no);
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key == "n") {
        n = parse_number<long long>(value, line_no, "n");
        if (n < kMinSpins || n > kMaxSpins) throw ValidationError("line " + std::to_string(line_no) + ": n out of range");
        couplings.assign(coupling_count(static_cast<unsigned>(n)), 0.0);
        seen_coupling.assign(couplings.size(), false);
        fields.assign(static_cast<std::size_t>(n), 0.0);
        seen_field.assign(fields.size(), false);
      } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(value, line_no, "seed");
        have_seed = true;
      } else {
        throw ParseError("unknown header key '" + std::string(key) + "'", line_no);
      }
      continue;
    }

    const auto tok = tokens(line);
    const auto un = static_cast<unsigned>(n);
    if (section == Section::couplings) {
      if (tok.size() != 3) throw ParseError("coupling line needs 'i j J_ij'", line_no);
      const auto i = parse_number<unsigned>(tok[0], line_no, "coupling index i");
      const auto j = parse_number<unsigned>(tok[1], line_no, "coupling index j");
      const auto v = parse_number<double>(tok[2], line_no, "coupling value");
      if (i < 1 || j <= i || j > un) {
        throw ValidationError("line " + std::to_string(line_no) + ": coupling index (" + std::to_string(i) + "," +
                              std::to_string(j) + ") invalid for n=" + std::to_string(n));
      }
      const auto off = coupling_offset(un, i - 1, j - 1);
      if (seen_coupling[off]) throw ParseError("duplicate coupling", line_no);
      seen_coupling[off] = true;
      couplings[off] = v;
    } else {
      if (tok.size() != 2) throw ParseError("field line needs 'i h_i'", line_no);
      const auto i = parse_number<unsigned>(tok[0], line_no, "field index");
      const auto v = parse_number<double>(tok[1], line_no, "field value");
      if (i < 1 || i > un) {
        throw ValidationError("line " + std::to_string(line_no) + ": field index " + std::to_string(i) +
                              " invalid for n=" + std::to_string(n));
      }
      if (seen_field[i - 1]) throw ParseError("duplicate field", line_no);
      seen_field[i - 1] = true;
      fields[i - 1] = v;
    }
  }

  if (n < 0) throw ParseError("missing 'n=' header", 0);
  if (!have_seed) throw ParseError("missing 'seed=' header", 0);
  std::size_t missing = 0;
  for (bool s : seen_coupling) missing += !s;
  if (missing) throw ParseError("truncated: " + std::to_string(missing) + " coupling(s) missing", line_no);
  missing = 0;
  for (bool s : seen_field) missing += !s;
  if (missing) throw ParseError("truncated: " + std::to_string(missing) + " field(s) missing", line_no);

  return SKInstance(static_cast<unsigned>(n), std::move(couplings), std::move(fields), seed);
}

void save_instance(const SKInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_instance(inst);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SKInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_instance(buf.str());
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

}  // namespace qamc
