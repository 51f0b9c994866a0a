#pragma once
// Near-resonance clustering of the padded mode ball. Two modes are adjacent
// when |m-n| + |lam_m^2 - lam_n^2| <= (|m|+|n|)^{c_d}; clusters are the
// connected components over ball(2R). Interior clusters are certified
// complete: every potential neighbor of their members lies inside ball(2R).

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diowave/lattice.hpp"

namespace diowave {

struct Cluster {
  std::vector<Mode> members;  // sorted (|n|^2, lex)
  double weight = 1;          // K_alpha: 1 for the origin cluster, else min |n|
  double min_abs = 0, max_abs = 0;
  bool interior = false;
  bool origin = false;
};

class ClusterPartition {
 public:
  const DispersionMatrix& matrix() const { return a_; }
  int radius() const { return radius_; }
  double c_d() const { return c_d_; }
  const ModeBall& padded_ball() const { return padded_; }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  const Cluster& cluster(int alpha) const { return clusters_[std::size_t(alpha)]; }

  // -1 outside the padded ball.
  int cluster_of(const Mode& m) const {
    int i = padded_.index(m);
    return i < 0 ? -1 : cluster_of_[std::size_t(i)];
  }
  int cluster_of_index(std::size_t ball_index) const { return cluster_of_[ball_index]; }

  double weight_of(int alpha) const { return clusters_[std::size_t(alpha)].weight; }
  double weight_of_mode(const Mode& m) const;

  // Max |n| over the origin cluster; feeds the default high-frequency cutoff.
  double origin_bound() const { return clusters_.front().max_abs; }

  // Smallest alpha >= 1 with K_alpha >= cutoff; -1 when the truncation holds
  // no such cluster. Clusters are sorted by weight, so the high-frequency set
  // is exactly {alpha >= alpha0}.
  int high_frequency_cutoff(double cutoff) const;
  bool high_frequency(const Mode& m, double cutoff) const;

  // Edge-reach bound used for interior marking: any edge leaving ball(R) has
  // length <= interior_reach(), and interior requires interior_reach() <= R.
  double interior_reach() const { return reach_; }

  // Reconstructs a partition from serialized parts, re-deriving and checking
  // every derived field. Throws std::runtime_error on any inconsistency.
  static ClusterPartition from_parts(const DispersionMatrix& A, int radius, double c_d,
                                     std::vector<Cluster> clusters,
                                     std::vector<std::int32_t> cluster_of);

  friend ClusterPartition build_partition(const DispersionMatrix&, int, double);

 private:
  ClusterPartition(const DispersionMatrix& A, int radius, double c_d, ModeBall padded,
                   std::vector<Cluster> clusters, std::vector<std::int32_t> cluster_of,
                   double reach);

  DispersionMatrix a_;
  int radius_;
  double c_d_;
  ModeBall padded_;
  std::vector<Cluster> clusters_;
  std::vector<std::int32_t> cluster_of_;
  double reach_;
};

// Builds the partition of ball(2*radius). Throws std::runtime_error naming the
// offending component when an interior non-origin cluster fails dyadicity
// (max |n| <= 2 min |n|); dyadicity is verified, never assumed.
ClusterPartition build_partition(const DispersionMatrix& A, int radius, double c_d);

struct CertificateReport {
  bool pass = false;
  double measured = 0;
  std::uint64_t checked = 0;
  std::string detail;
};

// Re-verifies dyadicity of interior non-origin clusters; measured is the
// worst max/min radius ratio.
CertificateReport certify_dyadicity(const ClusterPartition& p);

// Exhaustive strict separation over cross-cluster pairs in ball(R) whose
// clusters are both interior; measured is the minimum margin
// |m-n| + |lam_m^2-lam_n^2| - (|m|+|n|)^{c_d}.
CertificateReport certify_separation(const ClusterPartition& p);

// Cluster-weighted h^s vs standard Sobolev h^s on random states supported on
// ball(R): ratio must lie in [2^{-s}, 1] once per-cluster dyadicity holds on
// the state ball; measured is the worst ratio deviation.
CertificateReport certify_norm_equivalence(const ClusterPartition& p, double s, int states,
                                           std::uint64_t seed);

// Interior clusters must reappear verbatim when the partition is rebuilt at
// twice the radius.
CertificateReport certify_truncation_stability(const ClusterPartition& base,
                                               const ClusterPartition& doubled);

// sqrt(sum_n K(n)^{2s} |a_n|^2) with the state vector ordered like state_ball.
double cluster_norm_hs(const ClusterPartition& p, const ModeBall& state_ball,
                       std::span<const std::complex<double>> a, double s);

// sqrt(sum_n max(1,|n|)^{2s} |a_n|^2).
double sobolev_norm_hs(const ModeBall& state_ball, std::span<const std::complex<double>> a,
                       double s);

void save_partition_csv(const ClusterPartition& p, const std::string& path);
ClusterPartition load_partition_csv(const std::string& path);

}  // namespace diowave
