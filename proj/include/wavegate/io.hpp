#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wavegate/gramian.hpp"
#include "wavegate/packets.hpp"

namespace wavegate {

/// Shortest text keeping at least 17 significant digits (round-trip safe).
std::string fmt17(double x);

/// Parameter set and seed stamped into every output file.
struct Provenance {
  std::string tool;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> items;

  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, long long value);
  std::string comment_block() const;  // "# key = value" lines
  std::string json_object() const;
};

void write_matrices_json(const std::string& path, const LocalMatrices& lm,
                         const Provenance& prov);

void write_dispersion_csv(const std::string& path, const DispersionTable& t,
                          const Provenance& prov);

void write_energy_csv(const std::string& path, const RunResult& rr,
                      const Provenance& prov);

void write_trap_csv(const std::string& path,
                    const std::vector<TrapResult>& rows,
                    const Provenance& prov);

/// One observability measurement; delta < 0 marks an unfiltered row.
struct CtRow {
  int k = 0;
  double lambda = 0;
  double T = 0;
  double h = 0;
  int J = 0;
  int N = 0;
  double delta = -1.0;
  int physical_only = 0;
  double ct = 0;
  double mu_min = 0;
  int deflated_dim = 0;
};

void write_ct_csv(const std::string& path, const std::vector<CtRow>& rows,
                  const Provenance& prov);

std::vector<CtRow> read_ct_csv(const std::string& path);

void write_rate_json(const std::string& path, const RateFit& fit,
                     const Provenance& prov);

}  // namespace wavegate
