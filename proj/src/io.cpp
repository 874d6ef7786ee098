#include "lrsm/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace lrsm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             std::size_t col, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ":" +
                   std::to_string(col) + ": " + what);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> raw_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 &&
        static_cast<unsigned char>(line[0]) == 0xEF)
      line.erase(0, 3);  // UTF-8 byte-order mark
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (raw_header.empty()) {
      raw_header = std::move(fields);
    } else {
      if (fields.size() != raw_header.size())
        parse_fail(path, line_no, fields.size(),
                   "expected " + std::to_string(raw_header.size()) +
                       " fields, got " + std::to_string(fields.size()));
      rows.push_back(std::move(fields));
    }
  }
  if (raw_header.empty()) throw ParseError(path + ": missing header row");
  if (rows.empty()) throw ParseError(path + ": no data rows");

  // A first column whose first data cell is non-numeric carries unit ids.
  double probe;
  const bool has_id = !parse_number(rows[0][0], probe);

  CsvTable t;
  t.id_name = has_id ? raw_header[0] : std::string();
  const std::size_t first = has_id ? 1 : 0;
  if (raw_header.size() - first == 0)
    throw ParseError(path + ": no numeric columns");
  t.header.assign(raw_header.begin() + static_cast<long>(first),
                  raw_header.end());
  t.values.resize(static_cast<Index>(rows.size()),
                  static_cast<Index>(raw_header.size() - first));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (has_id) t.ids.push_back(rows[r][0]);
    for (std::size_t c = first; c < raw_header.size(); ++c) {
      double v;
      if (!parse_number(rows[r][c], v))
        parse_fail(path, r + 2, c + 1,
                   "expected a number in column '" + raw_header[c] +
                       "', got '" + rows[r][c] + "'");
      t.values(static_cast<Index>(r), static_cast<Index>(c - first)) = v;
    }
  }
  return t;
}

DesignData load_data(const std::string& path, const std::string& response) {
  const CsvTable t = read_csv(path);
  Index resp_col = -1;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c] == response) resp_col = static_cast<Index>(c);
  if (resp_col < 0)
    throw ParseError(path + ": response column '" + response + "' not found");

  DesignData d;
  const Index n = t.values.rows();
  const Index k = t.values.cols();  // response + covariates
  d.y = t.values.col(resp_col);
  d.x.resize(n, k);  // intercept replaces the response slot
  d.x.col(0).setOnes();
  d.names.push_back("intercept");
  Index out = 1;
  for (Index c = 0; c < k; ++c) {
    if (c == resp_col) continue;
    d.x.col(out++) = t.values.col(c);
    d.names.push_back(t.header[static_cast<std::size_t>(c)]);
  }
  return d;
}

Matrix read_coords(const std::string& path) {
  const CsvTable t = read_csv(path);
  Index cx = -1, cy = -1;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string h = lower(t.header[c]);
    if (h == "x" && cx < 0) cx = static_cast<Index>(c);
    if (h == "y" && cy < 0) cy = static_cast<Index>(c);
  }
  if (cx < 0 || cy < 0) {
    if (t.values.cols() < 2)
      throw ParseError(path + ": need two coordinate columns");
    cx = 0;
    cy = 1;
  }
  Matrix coords(t.values.rows(), 2);
  coords.col(0) = t.values.col(cx);
  coords.col(1) = t.values.col(cy);
  return coords;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string effects_csv(const EffectsEstimate& est) {
  std::ostringstream out;
  const bool ci = est.ci_de.has_value() && est.ci_ie.has_value();
  out << "covariate,de,ie";
  if (ci) out << ",de_lower,de_upper,ie_lower,ie_upper";
  out << "\n";
  for (Index k = 0; k < est.de.size(); ++k) {
    out << est.names[static_cast<std::size_t>(k)] << ","
        << format_double(est.de[k]) << "," << format_double(est.ie[k]);
    if (ci)
      out << "," << format_double((*est.ci_de)(k, 0)) << ","
          << format_double((*est.ci_de)(k, 1)) << ","
          << format_double((*est.ci_ie)(k, 0)) << ","
          << format_double((*est.ci_ie)(k, 1));
    out << "\n";
  }
  return out.str();
}

std::string bootstrap_csv(const FittedModel& fitted, const EffectsEstimate& est,
                          const BootstrapResult& res) {
  const Index successes = res.m - res.failures;
  std::ostringstream out;
  out << "name,estimate,lower,upper,replicates,failures\n";
  auto row = [&](const std::string& name, double point, double lo, double hi) {
    out << name << "," << format_double(point) << "," << format_double(lo)
        << "," << format_double(hi) << "," << successes << "," << res.failures
        << "\n";
  };
  const std::size_t m_ok = res.theta_samples.size();
  Vector dep(m_ok), ratio(m_ok);
  const bool has_rho = fitted.theta.rho.has_value();
  const bool has_phi = fitted.theta.phi.has_value();
  for (std::size_t i = 0; i < m_ok; ++i) {
    ratio[static_cast<Index>(i)] = res.theta_samples[i].ratio;
    if (has_rho)
      dep[static_cast<Index>(i)] = *res.theta_samples[i].rho;
    else if (has_phi)
      dep[static_cast<Index>(i)] = *res.theta_samples[i].phi;
  }
  if (has_rho || has_phi) {
    const auto ci = percentile_ci(dep, res.level);
    row(has_rho ? "rho" : "phi",
        has_rho ? *fitted.theta.rho : *fitted.theta.phi, ci.first, ci.second);
  }
  if (has_rho && has_phi) {  // LSAC second dependence parameter
    for (std::size_t i = 0; i < m_ok; ++i)
      dep[static_cast<Index>(i)] = *res.theta_samples[i].phi;
    const auto ci = percentile_ci(dep, res.level);
    row("phi", *fitted.theta.phi, ci.first, ci.second);
  }
  {
    const auto ci = percentile_ci(ratio, res.level);
    row("ratio", fitted.theta.ratio, ci.first, ci.second);
  }
  for (Index k = 0; k < est.de.size(); ++k) {
    const std::string& cov = est.names[static_cast<std::size_t>(k)];
    row("de:" + cov, est.de[k], (*est.ci_de)(k, 0), (*est.ci_de)(k, 1));
    row("ie:" + cov, est.ie[k], (*est.ci_ie)(k, 0), (*est.ci_ie)(k, 1));
  }
  return out.str();
}

std::string fit_report_json(const FittedModel& fitted,
                            const EffectsEstimate* effects,
                            const double* moran, Index n, Index l) {
  nlohmann::json j;
  j["model"] = to_string(fitted.kind);
  j["n"] = n;
  j["rank"] = l;
  j["alt_intercept"] = fitted.alt_intercept;

  nlohmann::json coefs = nlohmann::json::array();
  for (Index i = 0; i < fitted.beta.size(); ++i) {
    nlohmann::json c;
    c["name"] = i < static_cast<Index>(fitted.names.size())
                    ? fitted.names[static_cast<std::size_t>(i)]
                    : "b" + std::to_string(i);
    c["estimate"] = fitted.beta[i];
    c["se"] = fitted.se_beta[i];
    coefs.push_back(c);
  }
  j["coefficients"] = coefs;

  if (fitted.kind != ModelKind::LM) {
    nlohmann::json th;
    if (fitted.theta.rho) th["rho"] = *fitted.theta.rho;
    if (fitted.theta.phi) th["phi"] = *fitted.theta.phi;
    th["ratio"] = fitted.theta.ratio;
    j["theta"] = th;
    j["gamma"] = std::vector<double>(fitted.gamma.data(),
                                     fitted.gamma.data() + fitted.gamma.size());
  }
  j["tau2"] = fitted.tau2;
  j["sigma2"] = fitted.sigma2;
  j["loglik_r"] = fitted.loglik_r;

  nlohmann::json diag;
  diag["evaluations"] = fitted.diagnostics.evaluations;
  diag["starts"] = fitted.diagnostics.starts;
  diag["converged"] = fitted.diagnostics.converged;
  diag["boundary"] = fitted.diagnostics.boundary;
  diag["warnings"] = fitted.diagnostics.warnings;
  j["diagnostics"] = diag;

  if (moran) j["moran_z"] = *moran;
  if (effects) {
    nlohmann::json e;
    e["covariates"] = effects->names;
    e["de"] = std::vector<double>(effects->de.data(),
                                  effects->de.data() + effects->de.size());
    e["ie"] = std::vector<double>(effects->ie.data(),
                                  effects->ie.data() + effects->ie.size());
    if (effects->ci_de) {
      nlohmann::json ci = nlohmann::json::array();
      for (Index k = 0; k < effects->ci_de->rows(); ++k)
        ci.push_back({(*effects->ci_de)(k, 0), (*effects->ci_de)(k, 1)});
      e["ci_de"] = ci;
    }
    if (effects->ci_ie) {
      nlohmann::json ci = nlohmann::json::array();
      for (Index k = 0; k < effects->ci_ie->rows(); ++k)
        ci.push_back({(*effects->ci_ie)(k, 0), (*effects->ci_ie)(k, 1)});
      e["ci_ie"] = ci;
    }
    e["level"] = effects->level;
    j["effects"] = e;
  }
  return j.dump(2) + "\n";
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t weights_content_hash(const SpatialWeights& w, Index l) {
  std::vector<std::tuple<Index, Index, double>> trips;
  trips.reserve(static_cast<std::size_t>(w.entries.nonZeros()));
  for (int outer = 0; outer < w.entries.outerSize(); ++outer)
    for (SparseMatrix::InnerIterator it(w.entries, outer); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  std::sort(trips.begin(), trips.end());

  std::uint64_t h = fnv1a("lrsm-basis-v1", 13);
  auto mix = [&](const void* p, std::size_t len) { h = fnv1a(p, len, h); };
  const std::int64_t n = w.n(), rank = l;
  const char scaled = w.scaled ? 1 : 0;
  mix(&n, sizeof n);
  mix(&rank, sizeof rank);
  mix(&scaled, sizeof scaled);
  for (const auto& [r, c, v] : trips) {
    const std::int64_t ri = r, ci = c;
    mix(&ri, sizeof ri);
    mix(&ci, sizeof ci);
    mix(&v, sizeof v);
  }
  return h;
}

namespace {
constexpr char kBasisMagic[8] = {'L', 'R', 'S', 'M', 'E', 'B', '0', '1'};
}

void save_basis(const std::string& path, const EigenBasis& basis,
                std::uint64_t content_hash) {
  std::ostringstream out(std::ios::binary);
  out.write(kBasisMagic, sizeof kBasisMagic);
  const std::uint64_t h = content_hash;
  const std::int64_t n = basis.n(), l = basis.l();
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&l), sizeof l);
  out.write(reinterpret_cast<const char*>(basis.lambdas.data()),
            static_cast<std::streamsize>(sizeof(double) * basis.lambdas.size()));
  out.write(reinterpret_cast<const char*>(basis.e.data()),
            static_cast<std::streamsize>(sizeof(double) * basis.e.size()));
  atomic_write(path, out.str());
}

bool load_basis(const std::string& path, std::uint64_t content_hash,
                EigenBasis& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t h;
  std::int64_t n, l;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&l), sizeof l);
  if (!in || std::memcmp(magic, kBasisMagic, sizeof magic) != 0 ||
      h != content_hash || n <= 0 || l <= 0 || l > n)
    return false;
  EigenBasis b;
  b.lambdas.resize(l);
  b.e.resize(n, l);
  in.read(reinterpret_cast<char*>(b.lambdas.data()),
          static_cast<std::streamsize>(sizeof(double) * l));
  in.read(reinterpret_cast<char*>(b.e.data()),
          static_cast<std::streamsize>(sizeof(double) * n * l));
  if (!in) return false;
  out = std::move(b);
  return true;
}

}  // namespace lrsm
