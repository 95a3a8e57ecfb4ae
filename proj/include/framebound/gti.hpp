#pragma once

// Generalized translation-invariant systems in layer normal form and the
// builders that reduce Gabor, wavelet, composite-dilation, shearlet,
// continuous and N-adic systems to it.

#include "framebound/lattice.hpp"
#include "framebound/spectra.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace framebound {

enum class Domain { real, integer };

/// One generator g_{j,p} with its quadrature weight (1 for counting measure).
struct Component {
  Generator g;
  double weight = 1.0;
};

/// (Gamma_j, {g_{j,p}}, mu_{P_j}) with the precomputed prefix 1/covol(Gamma_j).
struct Layer {
  TranslationGroup group = TranslationGroup::full(1);
  std::vector<Component> components;
  double prefix = 1.0;
  int scale = 0;
  int family = 0;
  int shear = 0;
  /// Layers outside the alpha truncation still count in kappa but add no annihilator points.
  bool enumerable = true;
  std::string label;

  bool active_at(const Point& w) const;
};

/// Data of a nested wavelet system (B Gamma^* contained in Gamma^*), B = A^T.
struct Nesting {
  RationalMatrix B;
  RationalMatrix dual_basis;  // C^#
  double det_c = 1.0;
  int j_min = 0;
  int j_max = 0;
  std::vector<Generator> psi;
};

struct SystemSpec {
  std::string label;
  Domain domain = Domain::real;
  int dim = 1;
  std::vector<Layer> layers;

  /// Template instantiation j -> layer (wavelet-type families), used for band-safety checks.
  std::function<Layer(int)> template_layer;
  int j_min = 0;
  int j_max = 0;
  /// Certified bound on the omitted layers' contribution to every |t_alpha|.
  double tail_bound = 0.0;

  bool shift_invariant = false;
  std::optional<Nesting> nesting;
  /// Modulation lattice of a Gabor system; its fundamental domain is a period of every t_alpha.
  std::optional<RationalMatrix> period;
  bool ucp_asserted = false;
  bool disjoint_certified = false;

  /// N-adic example data: base N and offsets tau_j of the listed layers.
  std::int64_t nadic_base = 0;
  std::vector<std::int64_t> tau;

  std::vector<TranslationGroup> groups() const;
  /// True iff every layer translates along layers[0]'s group.
  bool single_lattice() const;
};

// ------------------------------------------------------------------- Gabor

/// Modulations: a lattice (sum) or a quadrature (integral over Lambda).
struct ModulationQuadrature {
  std::vector<Point> nodes;
  std::vector<double> weights;
};
using Modulations = std::variant<RationalMatrix, ModulationQuadrature>;

/// {T_gamma M_lambda g_l}: one layer on Gamma whose components are g^_l(w - lambda).
/// For a lattice Lambda, lambdas with |lambda| <= modulation_radius are kept
/// (default: twice the generator reach plus two periods of Lambda, which also
/// covers the default fiber oracle window).
SystemSpec gabor_system(const std::vector<Generator>& generators, const RationalMatrix& gamma,
                        const Modulations& lambda, double modulation_radius = -1.0);

/// Time side of a one-dimensional Gabor system with Gamma = a Z and Lambda = b Z.
struct GaborTimeSide {
  std::vector<SpaceFunction> generators;
  Rational a;
  Rational b;
};

/// s_alpha(x) = (1/b) sum_{gamma in aZ} sum_l conj(g_l(x - gamma - alpha)) g_l(x - gamma), alpha in (1/b)Z.
std::vector<Complex> gabor_time_autocorr(const GaborTimeSide& sys, double alpha, const std::vector<double>& x);

// ----------------------------------------------------------------- wavelets

/// Dilation data: exact rational matrix, or floating matrix with an optional
/// certificate that the lattices B^j Gamma^* pairwise meet only at 0.
struct Dilation {
  std::variant<RationalMatrix, Eigen::MatrixXd> matrix;
  bool disjoint_certificate = false;
};

/// Lattice generator C, exact or floating.
using LatticeBasis = std::variant<RationalMatrix, Eigen::MatrixXd>;

/// {D_{A^j} T_gamma psi_l}, j in [j_min, j_max]: layer j has Gamma_j = A^{-j} Gamma and
/// generators |det A|^{-j/2} psi^_l(A^{-jT} w).
SystemSpec wavelet_system(const std::vector<Generator>& psi, const Dilation& a, const LatticeBasis& gamma,
                          int j_min, int j_max);

/// Explicit dilation list {A_j}: layer j has Gamma_j = A_j^{-1} Gamma, generator D_{A_j} psi.
SystemSpec wavelet_system(const std::vector<Generator>& psi, const std::vector<RationalMatrix>& dilations,
                          const RationalMatrix& gamma);

/// {D_{A_i B_j} T_gamma psi_l}; requires A_i^T Gamma^* = Gamma^* for every i.
SystemSpec composite_wavelet_system(const std::vector<Generator>& psi, const std::vector<RationalMatrix>& a_list,
                                    const std::vector<RationalMatrix>& b_list, const RationalMatrix& gamma);

/// Classical shearlets D_{S^k A^j}, A = diag(4,2), S = [[1,1],[0,1]].
SystemSpec classical_shearlet_system(const std::vector<Generator>& psi, const RationalMatrix& gamma, int j_min,
                                     int j_max, int k_min, int k_max);

/// Low-pass translates plus the two cones D_{S_i^k A_i^j}, j in [0, j_max], |k| <= 2^j.
SystemSpec cone_adapted_shearlet_system(const Generator& phi, const Generator& psi1, const Generator& psi2,
                                        const RationalMatrix& gamma, int j_max);

/// Unique m >= 0 with alpha = A^m q, q in Gamma^* \ A Gamma^* (alpha != 0 in Gamma^*).
int nested_level(const RationalVector& alpha, const RationalMatrix& a, const RationalMatrix& gamma);

RationalMatrix shearlet_dilation(int cone);
RationalMatrix shearlet_shear(int cone);

// --------------------------------------------------------- continuous TI

/// Single full-group layer; only t_0 exists.
SystemSpec continuous_ti_system(const std::vector<Component>& nodes, int dim);

struct AlphaShearletOptions {
  double alpha = 0.5;
  int n_a = 48;
  int n_r = 48;
  double a_min = 1.0 / 64;
  bool cone = true;
  double r_max = 2.0;  // |r| bound when cone == false
};

/// First-order (l = 1) alpha-shearlet transform: g^_{a,r}(w) = a^{(1+alpha)/2} psi^(a w1, a^alpha (r w1 + w2))
/// integrated against a^{-3} da dr by midpoint quadrature (log-uniform in a).
SystemSpec alpha_shearlet_ti(const Generator& psi, const AlphaShearletOptions& options);

/// Continuous wavelet transform on R: g^_a(w) = a^{1/2} psi^(a w) against da/a^2 on [a_min, a_max].
SystemSpec continuous_wavelet_ti(const Generator& psi, double a_min, double a_max, int nodes);

// -------------------------------------------------------- N-adic example

struct NadicSystem {
  SystemSpec system;
  std::vector<std::int64_t> tau;
};

/// Greedy offsets tau_1..tau_count: tau_j is the integer of least absolute value
/// (positive on ties) outside every earlier coset tau_i + N^i Z.
std::vector<std::int64_t> nadic_offsets(std::int64_t n, int count);

/// Layers Gamma_j = N^j Z with g_j = 1_{tau_j}. The first j_max layers define the alpha
/// truncation; further layers are kept (while N^j fits in 61 bits) so the omitted tail
/// N^{-J}/(N-1) stays below double resolution.
NadicSystem nadic_counterexample(std::int64_t n, int j_max);

/// True iff the cosets tau_j + N^j Z are pairwise disjoint (exact residue check).
bool nadic_cosets_disjoint(std::int64_t n, const std::vector<std::int64_t>& tau);

}  // namespace framebound
