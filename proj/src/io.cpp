#include "wavegate/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wavegate/params.hpp"

namespace wavegate {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void Provenance::add(const std::string& key, const std::string& value) {
  items.emplace_back(key, value);
}

void Provenance::add(const std::string& key, double value) {
  items.emplace_back(key, fmt17(value));
}

void Provenance::add(const std::string& key, long long value) {
  items.emplace_back(key, std::to_string(value));
}

std::string Provenance::comment_block() const {
  std::ostringstream os;
  os << "# wavegate " << tool << "\n";
  os << "# seed = " << seed << "\n";
  for (const auto& [k, v] : items) os << "# " << k << " = " << v << "\n";
  return os.str();
}

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

// Numeric-looking values are emitted bare so the JSON stays typed.
bool plain_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParamError("cannot open output file: " + path);
  return f;
}

void close_checked(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw ParamError("write failed: " + path);
}

void write_row_major(std::ostream& os, const Eigen::MatrixXd& m) {
  os << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i + j > 0) os << ", ";
      os << fmt17(m(i, j));
    }
  os << "]";
}

}  // namespace

std::string Provenance::json_object() const {
  std::ostringstream os;
  os << "{\"tool\": \"" << json_escape(tool) << "\", \"seed\": " << seed;
  for (const auto& [k, v] : items) {
    os << ", \"" << json_escape(k) << "\": ";
    if (plain_number(v))
      os << v;
    else
      os << "\"" << json_escape(v) << "\"";
  }
  os << "}";
  return os.str();
}

void write_matrices_json(const std::string& path, const LocalMatrices& lm,
                         const Provenance& prov) {
  auto f = open_out(path);
  f << "{\n";
  f << "  \"k\": " << lm.params.k << ",\n";
  f << "  \"h\": " << fmt17(lm.params.h) << ",\n";
  f << "  \"block\": " << lm.block() << ",\n";
  f << "  \"layout\": \"row-major\",\n";
  const std::pair<const char*, const Eigen::MatrixXd*> mats[] = {
      {"M", &lm.M}, {"K0", &lm.K0}, {"Km1", &lm.Km1}, {"Kp1", &lm.Kp1}};
  for (const auto& [name, mat] : mats) {
    f << "  \"" << name << "\": ";
    write_row_major(f, *mat);
    f << ",\n";
  }
  f << "  \"provenance\": " << prov.json_object() << "\n";
  f << "}\n";
  close_checked(f, path);
}

void write_dispersion_csv(const std::string& path, const DispersionTable& t,
                          const Provenance& prov) {
  auto f = open_out(path);
  f << prov.comment_block();
  f << "xi,branch,sigma,omega,vg,is_physical,flag\n";
  for (int i = 0; i < t.points(); ++i)
    for (int b = 0; b < t.branches(); ++b) {
      f << fmt17(t.xi[size_t(i)]) << "," << b << "," << fmt17(t.sigma(b, i))
        << "," << fmt17(t.omega(b, i)) << "," << fmt17(t.vg(b, i)) << ","
        << (b == t.physical ? 1 : 0) << ","
        << to_string(t.flag[size_t(b)][size_t(i)]) << "\n";
    }
  close_checked(f, path);
}

void write_energy_csv(const std::string& path, const RunResult& rr,
                      const Provenance& prov) {
  auto f = open_out(path);
  f << prov.comment_block();
  f << "n,t,E_total,E_obs\n";
  for (const RunSample& s : rr.series)
    f << s.n << "," << fmt17(s.t) << "," << fmt17(s.e_total) << ","
      << fmt17(s.e_obs) << "\n";
  close_checked(f, path);
}

void write_trap_csv(const std::string& path,
                    const std::vector<TrapResult>& rows,
                    const Provenance& prov) {
  auto f = open_out(path);
  f << prov.comment_block();
  f << "h,J,N,E0,obs_integral,fraction,ct_lower_bound\n";
  for (const TrapResult& r : rows)
    f << fmt17(r.h) << "," << r.J << "," << r.N << "," << fmt17(r.e0) << ","
      << fmt17(r.obs_integral) << "," << fmt17(r.fraction) << ","
      << fmt17(r.ct_lower_bound) << "\n";
  close_checked(f, path);
}

void write_ct_csv(const std::string& path, const std::vector<CtRow>& rows,
                  const Provenance& prov) {
  auto f = open_out(path);
  f << prov.comment_block();
  f << "k,lambda,T,h,J,N,delta,physical_only,C_T,mu_min,deflated_dim\n";
  for (const CtRow& r : rows)
    f << r.k << "," << fmt17(r.lambda) << "," << fmt17(r.T) << ","
      << fmt17(r.h) << "," << r.J << "," << r.N << "," << fmt17(r.delta)
      << "," << r.physical_only << "," << fmt17(r.ct) << ","
      << fmt17(r.mu_min) << "," << r.deflated_dim << "\n";
  close_checked(f, path);
}

std::vector<CtRow> read_ct_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParamError("cannot open input file: " + path);
  std::vector<CtRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // column header
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11)
      throw ParamError("malformed row in " + path + ": " + line);
    CtRow r;
    r.k = std::stoi(cells[0]);
    r.lambda = std::stod(cells[1]);
    r.T = std::stod(cells[2]);
    r.h = std::stod(cells[3]);
    r.J = std::stoi(cells[4]);
    r.N = std::stoi(cells[5]);
    r.delta = std::stod(cells[6]);
    r.physical_only = std::stoi(cells[7]);
    r.ct = std::stod(cells[8]);
    r.mu_min = std::stod(cells[9]);
    r.deflated_dim = std::stoi(cells[10]);
    rows.push_back(r);
  }
  return rows;
}

void write_rate_json(const std::string& path, const RateFit& fit,
                     const Provenance& prov) {
  auto f = open_out(path);
  f << "{\n";
  f << "  \"r\": " << fmt17(fit.r) << ",\n";
  f << "  \"intercept\": " << fmt17(fit.intercept) << ",\n";
  f << "  \"r2\": " << fmt17(fit.r2) << ",\n";
  f << "  \"points\": " << fit.points << ",\n";
  f << "  \"provenance\": " << prov.json_object() << "\n";
  f << "}\n";
  close_checked(f, path);
}

}  // namespace wavegate
