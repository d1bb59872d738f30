#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flaglp/grid.hpp"

namespace flaglp {

/// Product kernels live on R^{d1} x R^{d2} and are singular on both
/// coordinate subspaces; flag kernels on R^n x R^m are singular on {x = 0}.
enum class SingularType { Product, Flag };

using KernelFunction =
    std::function<cplx(std::span<const double> first, std::span<const double> second)>;

struct KernelSpec {
  std::string name;
  SingularType type = SingularType::Flag;
  int firstDim = 1;
  int secondDim = 1;
  KernelFunction evaluate;
  double truncationEps = 0;
  int derivativeOrderCap = 2;
};

/// Names accepted by registry_kernel.
std::vector<std::string> registry_names();
/// Built-in kernels: "k1-product", "k2-flag", "k2-odd", "smooth-bump",
/// "zero". Throws ConfigError for unknown names.
KernelSpec registry_kernel(const std::string& name);
KernelSpec zero_kernel(SingularType type, int firstDim, int secondDim);

/// Kernel from an expression over x, y, z (assigned in order to the first
/// then second factor coordinates), numbers, pi, i, + - * / ^, parentheses
/// and abs sqrt exp log sin cos. Throws ConfigError on a parse error.
KernelSpec expression_kernel(const std::string& expression, SingularType type, int firstDim,
                             int secondDim);

/// Compiled expression, exposed for testing.
class Expression {
 public:
  static Expression parse(const std::string& text);
  cplx evaluate(std::span<const double> vars) const;
  int max_variable() const { return maxVar_; }

  struct Node;

 private:
  std::vector<Node> nodes_;
  int root_ = -1;
  int maxVar_ = -1;
};

struct Expression::Node {
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Abs, Sqrt, Exp, Log, Sin, Cos };
  Op op = Op::Const;
  cplx value{};
  int var = 0;
  int a = -1;
  int b = -1;
};

/// Fitted constant of one inequality at each sample refinement.
struct ConstantCheck {
  std::string label;
  std::vector<double> perRefinement;
  double spread = 1;  // max / min across refinements (1 when all are 0)
  bool finite = true;
  bool stable = true;
};

struct KernelReport {
  std::string kernel;
  SingularType geometry = SingularType::Flag;
  std::vector<ConstantCheck> size;
  std::vector<ConstantCheck> cancellation;
  bool sizePassed = true;
  bool cancellationPassed = true;
  bool passed = true;
  /// Flag reports only: verdict of the pure-product size bounds
  /// |x|^{-n-|a|} |y|^{-m-|b|} on the same samples.
  bool productSizePassed = true;
  double maxSpread = 1;
  std::size_t samplesPerRefinement = 0;
};

struct ValidationOptions {
  std::size_t sampleBudget = 400;
  /// Allowed max/min ratio of a fitted constant across refinements.
  double stabilityFactor = 1.5;
  std::uint64_t bumpSeed = 20240601;
  int quadratureOrder = 8;
};

/// Differential inequalities and cancellation conditions of a product
/// kernel, fitted at two sample refinements.
KernelReport validate_product_kernel(const KernelSpec& k, const ValidationOptions& options = {});
/// Same for a flag kernel, plus the pure-product size contrast.
KernelReport validate_flag_kernel(const KernelSpec& k, const ValidationOptions& options = {});

/// Normalized bump family on R^d: the exp bump, its coordinate-moment
/// modulations and two seeded random smooth bumps, each with C^2 norm 1.
struct Bump {
  std::string name;
  std::function<double(std::span<const double>)> value;
};
std::vector<Bump> bump_family(int d, std::uint64_t seed);

enum class ProjectionDomain { Real, Torus };

struct ProjectionOptions {
  ProjectionDomain domain = ProjectionDomain::Real;
  double relTol = 1e-8;
  /// Absolute floor below which the error test is not relative.
  double absTol = 1e-13;
  int maxDepth = 20;
};

/// K(x, y) = int K#(x, y - z, z) dz for a product kernel with second factor
/// of dimension 1 (firstDim = n + 1). The z-integral is split at 0 and y and
/// evaluated by adaptive Gauss-Kronrod; each evaluation throws
/// IntegrationError when the tolerance is not met.
KernelSpec project_to_flag(const KernelSpec& ksharp, const ProjectionOptions& options = {});

struct FlagConvolution {
  SampledFunction output;
  /// max |multiplier| of the sampled truncated kernel: the exact L2 norm of
  /// the discrete operator.
  double operatorNorm = 0;
  /// max over sampled (j,k) and grid points of |psi_{j,k} * (K * f)| / M_s f.
  double majorantConstant = 0;
};

/// Truncated convolution (K chi_{|x| > eps}) * f through the FFT. Throws
/// TruncationError when eps is below the grid spacing.
FlagConvolution flag_convolve(const SampledFunction& f, const KernelSpec& k, double eps,
                              bool measureMajorant = false);

/// Frequency response of the sampled truncated kernel (spacing^d weighted).
std::vector<cplx> truncated_multiplier(const Grid& grid, const KernelSpec& k, double eps);

}  // namespace flaglp
