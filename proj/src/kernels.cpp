#include "flaglp/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "flaglp/error.hpp"
#include "flaglp/fft.hpp"
#include "flaglp/filters.hpp"
#include "flaglp/maximal.hpp"
#include "flaglp/parallel.hpp"
#include "flaglp/transform.hpp"

namespace flaglp {

// ---------------------------------------------------------------------------
// Expressions

namespace {

class Parser {
 public:
  Parser(const std::string& text, std::vector<Expression::Node>& nodes, int& maxVar)
      : text_(text), nodes_(nodes), maxVar_(maxVar) {}

  int parse() {
    const int root = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

 private:
  using Op = Expression::Node::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression error at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int add(Op op, int a = -1, int b = -1) {
    Expression::Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int constant(cplx v) {
    const int id = add(Op::Const);
    nodes_[static_cast<std::size_t>(id)].value = v;
    return id;
  }

  int expr() {
    int left = term();
    for (;;) {
      if (accept('+')) {
        left = add(Op::Add, left, term());
      } else if (accept('-')) {
        left = add(Op::Sub, left, term());
      } else {
        return left;
      }
    }
  }

  int term() {
    int left = unary();
    for (;;) {
      if (accept('*')) {
        left = add(Op::Mul, left, unary());
      } else if (accept('/')) {
        left = add(Op::Div, left, unary());
      } else {
        return left;
      }
    }
  }

  int unary() {
    if (accept('-')) return add(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  int power() {
    const int base = primary();
    if (accept('^')) return add(Op::Pow, base, unary());
    return base;
  }

  int primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (accept('(')) {
      const int inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(text_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t end = pos_;
      while (end < text_.size() && std::isalnum(static_cast<unsigned char>(text_[end]))) ++end;
      const std::string name = text_.substr(pos_, end - pos_);
      pos_ = end;
      if (name == "x" || name == "y" || name == "z") {
        const int id = add(Op::Var);
        const int var = name[0] - 'x';
        nodes_[static_cast<std::size_t>(id)].var = var;
        maxVar_ = std::max(maxVar_, var);
        return id;
      }
      if (name == "i") return constant(cplx(0, 1));
      if (name == "pi") return constant(std::numbers::pi);
      Op op;
      if (name == "abs") {
        op = Op::Abs;
      } else if (name == "sqrt") {
        op = Op::Sqrt;
      } else if (name == "exp") {
        op = Op::Exp;
      } else if (name == "log") {
        op = Op::Log;
      } else if (name == "sin") {
        op = Op::Sin;
      } else if (name == "cos") {
        op = Op::Cos;
      } else {
        fail("unknown identifier '" + name + "'");
      }
      if (!accept('(')) fail("expected '(' after " + name);
      const int arg = expr();
      if (!accept(')')) fail("expected ')'");
      return add(op, arg);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& text_;
  std::vector<Expression::Node>& nodes_;
  int& maxVar_;
  std::size_t pos_ = 0;
};

cplx integer_power(cplx base, long e) {
  if (e < 0) return 1.0 / integer_power(base, -e);
  cplx out{1.0, 0.0};
  while (e > 0) {
    if (e & 1) out *= base;
    base *= base;
    e >>= 1;
  }
  return out;
}

cplx eval_node(const std::vector<Expression::Node>& nodes, int id, std::span<const double> vars) {
  using Op = Expression::Node::Op;
  const auto& n = nodes[static_cast<std::size_t>(id)];
  switch (n.op) {
    case Op::Const:
      return n.value;
    case Op::Var:
      return vars[static_cast<std::size_t>(n.var)];
    case Op::Add:
      return eval_node(nodes, n.a, vars) + eval_node(nodes, n.b, vars);
    case Op::Sub:
      return eval_node(nodes, n.a, vars) - eval_node(nodes, n.b, vars);
    case Op::Mul:
      return eval_node(nodes, n.a, vars) * eval_node(nodes, n.b, vars);
    case Op::Div:
      return eval_node(nodes, n.a, vars) / eval_node(nodes, n.b, vars);
    case Op::Pow: {
      const cplx b = eval_node(nodes, n.a, vars);
      const cplx e = eval_node(nodes, n.b, vars);
      if (e.imag() == 0 && e.real() == std::round(e.real()) && std::abs(e.real()) <= 64) {
        return integer_power(b, static_cast<long>(e.real()));
      }
      return std::pow(b, e);
    }
    case Op::Neg:
      return -eval_node(nodes, n.a, vars);
    case Op::Abs:
      return std::abs(eval_node(nodes, n.a, vars));
    case Op::Sqrt:
      return std::sqrt(eval_node(nodes, n.a, vars));
    case Op::Exp:
      return std::exp(eval_node(nodes, n.a, vars));
    case Op::Log:
      return std::log(eval_node(nodes, n.a, vars));
    case Op::Sin:
      return std::sin(eval_node(nodes, n.a, vars));
    case Op::Cos:
      return std::cos(eval_node(nodes, n.a, vars));
  }
  return {};
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  Parser parser(text, e.nodes_, e.maxVar_);
  e.root_ = parser.parse();
  return e;
}

cplx Expression::evaluate(std::span<const double> vars) const {
  if (static_cast<int>(vars.size()) <= maxVar_) throw KernelError("expression needs more variables");
  return eval_node(nodes_, root_, vars);
}

// ---------------------------------------------------------------------------
// Registry

namespace {

double unit_bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

double norm2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

KernelSpec zero_kernel(SingularType type, int firstDim, int secondDim) {
  KernelSpec k;
  k.name = "zero";
  k.type = type;
  k.firstDim = firstDim;
  k.secondDim = secondDim;
  k.evaluate = [](std::span<const double>, std::span<const double>) { return cplx{}; };
  return k;
}

KernelSpec expression_kernel(const std::string& expression, SingularType type, int firstDim, int secondDim) {
  if (firstDim < 1 || secondDim < 1 || firstDim + secondDim > 3) {
    throw ConfigError("expression kernels use at most three variables x, y, z");
  }
  auto expr = std::make_shared<Expression>(Expression::parse(expression));
  if (expr->max_variable() >= firstDim + secondDim) {
    throw ConfigError("expression uses a variable beyond the kernel's " + std::to_string(firstDim + secondDim) +
                      " coordinates");
  }
  KernelSpec k;
  k.name = expression;
  k.type = type;
  k.firstDim = firstDim;
  k.secondDim = secondDim;
  k.evaluate = [expr, firstDim, secondDim](std::span<const double> a, std::span<const double> b) {
    double vars[3] = {0, 0, 0};
    for (int i = 0; i < firstDim; ++i) vars[i] = a[static_cast<std::size_t>(i)];
    for (int i = 0; i < secondDim; ++i) vars[firstDim + i] = b[static_cast<std::size_t>(i)];
    return expr->evaluate(std::span<const double>(vars, 3));
  };
  return k;
}

std::vector<std::string> registry_names() { return {"k1-product", "k2-flag", "k2-odd", "smooth-bump", "zero"}; }

KernelSpec registry_kernel(const std::string& name) {
  KernelSpec k;
  k.name = name;
  k.firstDim = 1;
  k.secondDim = 1;
  if (name == "k1-product") {
    k.type = SingularType::Product;
    k.evaluate = [](std::span<const double> u, std::span<const double> v) { return cplx(1.0 / (u[0] * v[0])); };
  } else if (name == "k2-flag") {
    k.type = SingularType::Flag;
    k.evaluate = [](std::span<const double> x, std::span<const double> y) {
      return 1.0 / (x[0] * cplx(x[0], y[0]));
    };
  } else if (name == "k2-odd") {
    // The part of 1/(x(x+iy)) that is odd in x.
    k.type = SingularType::Flag;
    k.evaluate = [](std::span<const double> x, std::span<const double> y) {
      return cplx(0.0, -y[0] / (x[0] * (x[0] * x[0] + y[0] * y[0])));
    };
  } else if (name == "smooth-bump") {
    k.type = SingularType::Product;
    k.firstDim = 2;
    k.evaluate = [](std::span<const double> u, std::span<const double> v) {
      return cplx(unit_bump(norm2(u)) * unit_bump(norm2(v)));
    };
  } else if (name == "zero") {
    return zero_kernel(SingularType::Flag, 1, 1);
  } else {
    throw ConfigError("unknown kernel '" + name + "'");
  }
  return k;
}

// ---------------------------------------------------------------------------
// Bumps

std::vector<Bump> bump_family(int d, std::uint64_t seed) {
  if (d < 1 || d > 3) throw ConfigError("bump family supports dimensions 1 to 3");
  std::vector<Bump> raw;
  raw.push_back({"exp-bump", [](std::span<const double> w) { return unit_bump(norm2(w)); }});
  for (int i = 0; i < d; ++i) {
    raw.push_back({"moment-" + std::to_string(i), [i](std::span<const double> w) {
                     return w[static_cast<std::size_t>(i)] * unit_bump(norm2(w));
                   }});
  }
  std::mt19937_64 rng(seed + static_cast<std::uint64_t>(d));
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int r = 0; r < 2; ++r) {
    std::vector<double> lin(static_cast<std::size_t>(d));
    std::vector<double> quad(static_cast<std::size_t>(d * d));
    for (double& c : lin) c = coef(rng);
    for (double& c : quad) c = coef(rng);
    raw.push_back({"random-" + std::to_string(r), [lin, quad, d](std::span<const double> w) {
                     double p = 1.0;
                     for (int i = 0; i < d; ++i) {
                       p += lin[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
                       for (int j = 0; j < d; ++j) {
                         p += quad[static_cast<std::size_t>(i * d + j)] * w[static_cast<std::size_t>(i)] *
                              w[static_cast<std::size_t>(j)];
                       }
                     }
                     return p * unit_bump(norm2(w));
                   }});
  }
  // C^2 norm: sup of |derivative| over orders <= 2, on a lattice covering the
  // unit ball, derivatives by central differences.
  const int steps = d == 1 ? 256 : (d == 2 ? 64 : 24);
  const double h = 1e-4;
  for (Bump& b : raw) {
    double c2 = 0;
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> w(static_cast<std::size_t>(d));
    for (;;) {
      for (int a = 0; a < d; ++a) w[static_cast<std::size_t>(a)] = -1.0 + 2.0 * (idx[static_cast<std::size_t>(a)] + 0.5) / steps;
      if (norm2(w) < 1.0) {
        c2 = std::max(c2, std::abs(b.value(w)));
        for (int a = 0; a < d; ++a) {
          auto shifted = [&](int axis, double s, int axis2, double s2) {
            auto v = w;
            v[static_cast<std::size_t>(axis)] += s;
            if (axis2 >= 0) v[static_cast<std::size_t>(axis2)] += s2;
            return b.value(v);
          };
          c2 = std::max(c2, std::abs((shifted(a, h, -1, 0) - shifted(a, -h, -1, 0)) / (2 * h)));
          for (int a2 = a; a2 < d; ++a2) {
            double second;
            if (a2 == a) {
              second = (shifted(a, h, -1, 0) - 2 * b.value(w) + shifted(a, -h, -1, 0)) / (h * h);
            } else {
              second = (shifted(a, h, a2, h) - shifted(a, h, a2, -h) - shifted(a, -h, a2, h) +
                        shifted(a, -h, a2, -h)) /
                       (4 * h * h);
            }
            c2 = std::max(c2, std::abs(second));
          }
        }
      }
      int a = d - 1;
      while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == steps) idx[static_cast<std::size_t>(a--)] = 0;
      if (a < 0) break;
    }
    const double scale = 1.0 / c2;
    auto inner = b.value;
    b.value = [inner, scale](std::span<const double> v) { return scale * inner(v); };
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

using Point = std::vector<double>;

// Multi-index as a list of axes (with repetition) over the concatenated
// coordinates of both factors.
using Axes = std::vector<int>;

struct Order {
  Axes axes;
  int first = 0;   // |alpha|
  int second = 0;  // |beta|
};

void collect_orders(int lo, int hi, int cap, Axes& current, std::vector<Axes>& out) {
  out.push_back(current);
  if (static_cast<int>(current.size()) == cap) return;
  const int start = current.empty() ? lo : current.back();
  for (int a = start; a < hi; ++a) {
    current.push_back(a);
    collect_orders(lo, hi, cap, current, out);
    current.pop_back();
  }
}

std::vector<Order> orders(int d1, int d2, int cap, bool first, bool second) {
  std::vector<Axes> all;
  Axes cur;
  const int lo = first ? 0 : d1;
  const int hi = second ? d1 + d2 : d1;
  collect_orders(lo, hi, cap, cur, all);
  std::vector<Order> out;
  for (auto& a : all) {
    Order o;
    o.axes = a;
    for (int v : a) (v < d1 ? o.first : o.second)++;
    out.push_back(std::move(o));
  }
  return out;
}

std::string order_label(const Order& o) {
  std::string s = "(";
  for (std::size_t i = 0; i < o.axes.size(); ++i) s += (i ? "," : "") + std::to_string(o.axes[i]);
  return s + ")";
}

class Evaluator {
 public:
  Evaluator(const KernelSpec& k) : k_(k) {}

  cplx value(const Point& p) const {
    std::span<const double> all(p);
    const cplx v = k_.evaluate(all.first(static_cast<std::size_t>(k_.firstDim)),
                               all.subspan(static_cast<std::size_t>(k_.firstDim)));
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      std::ostringstream s;
      s << "kernel '" << k_.name << "' is not finite at (";
      for (std::size_t i = 0; i < p.size(); ++i) s << (i ? ", " : "") << p[i];
      s << ")";
      throw KernelError(s.str());
    }
    return v;
  }

  double singular_distance(const Point& p) const {
    double a = 0, b = 0;
    for (int i = 0; i < k_.firstDim; ++i) a += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
    for (int i = 0; i < k_.secondDim; ++i) {
      b += p[static_cast<std::size_t>(k_.firstDim + i)] * p[static_cast<std::size_t>(k_.firstDim + i)];
    }
    return k_.type == SingularType::Product ? std::sqrt(std::min(a, b)) : std::sqrt(a);
  }

  // Nested central differences with step = distance to the singular set / 16,
  // capped so the stencil never crosses a coordinate subspace it moves across.
  cplx derivative(const Point& p, const Axes& axes) const {
    if (axes.empty()) return value(p);
    double dist = singular_distance(p);
    double a = 0, b = 0;
    bool first = false, second = false;
    for (int i = 0; i < k_.firstDim; ++i) a += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
    for (int i = 0; i < k_.secondDim; ++i) {
      b += p[static_cast<std::size_t>(k_.firstDim + i)] * p[static_cast<std::size_t>(k_.firstDim + i)];
    }
    for (int ax : axes) (ax < k_.firstDim ? first : second) = true;
    if (first) dist = std::min(dist, std::sqrt(a));
    if (second) dist = std::min(dist, std::sqrt(b));
    return derivative_step(p, axes, 0, dist / 16.0);
  }

 private:
  cplx derivative_step(const Point& p, const Axes& axes, std::size_t i, double h) const {
    if (i == axes.size()) return value(p);
    Point a = p, b = p;
    a[static_cast<std::size_t>(axes[i])] += h;
    b[static_cast<std::size_t>(axes[i])] -= h;
    return (derivative_step(a, axes, i + 1, h) - derivative_step(b, axes, i + 1, h)) / (2 * h);
  }

  const KernelSpec& k_;
};

std::vector<Point> directions(int d) {
  std::vector<Point> cand;
  Point e(static_cast<std::size_t>(d), 0.0);
  e[0] = 1;
  cand.push_back(e);
  e[0] = -1;
  cand.push_back(e);
  Point diag(static_cast<std::size_t>(d), 1.0);
  Point mixed(static_cast<std::size_t>(d));
  const double pattern[3] = {-0.6, 0.8, 0.3};
  for (int a = 0; a < d; ++a) mixed[static_cast<std::size_t>(a)] = pattern[a];
  for (Point* q : {&diag, &mixed}) {
    const double n = std::sqrt(norm2(*q));
    for (double& v : *q) v /= n;
    cand.push_back(*q);
  }
  std::vector<Point> out;
  for (const auto& c : cand) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

Point scaled(const Point& dir, int exponent) {
  Point p = dir;
  for (double& v : p) v = std::ldexp(v, exponent);
  return p;
}

Point concat(const Point& a, const Point& b) {
  Point p = a;
  p.insert(p.end(), b.begin(), b.end());
  return p;
}

ConstantCheck finish(std::string label, std::vector<double> values, double factor) {
  ConstantCheck c;
  c.label = std::move(label);
  c.perRefinement = std::move(values);
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (double v : c.perRefinement) {
    c.finite = c.finite && std::isfinite(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == 0) {
    c.spread = 1;
  } else if (lo == 0) {
    c.spread = std::numeric_limits<double>::infinity();
  } else {
    c.spread = hi / lo;
  }
  c.stable = c.finite && c.spread <= factor;
  return c;
}

// Symmetric (principal-value) integral of fn over the cube [-R, R]^d with
// the core [-R 2^-depth, R 2^-depth]^d removed. Each dyadic cube shell is
// split into boxes; boxes come in +/- pairs and fn(w) + fn(-w) is summed
// over one box of each pair with tensor Gauss-Legendre nodes.
template <class Fn>
cplx pv_integral(int d, double R, int depth, int order, Fn&& fn) {
  static const auto nodes8 = boost::math::quadrature::gauss<double, 8>::abscissa();
  static const auto weights8 = boost::math::quadrature::gauss<double, 8>::weights();
  (void)order;
  // Expand Boost's half-node tables into symmetric 8-point rules on [-1, 1].
  static const auto rule = [] {
    std::vector<std::pair<double, double>> r;
    for (std::size_t i = 0; i < nodes8.size(); ++i) {
      r.push_back({nodes8[i], weights8[i]});
      if (nodes8[i] != 0) r.push_back({-nodes8[i], weights8[i]});
    }
    return r;
  }();
  std::vector<std::vector<int>> boxes;
  {
    std::vector<int> t(static_cast<std::size_t>(d), -1);
    for (;;) {
      int firstNonzero = 0;
      for (int v : t) {
        if (v != 0) {
          firstNonzero = v;
          break;
        }
      }
      if (firstNonzero == 1) boxes.push_back(t);
      int a = d - 1;
      while (a >= 0 && ++t[static_cast<std::size_t>(a)] == 2) t[static_cast<std::size_t>(a--)] = -1;
      if (a < 0) break;
    }
  }
  cplx total{};
  Point w(static_cast<std::size_t>(d)), mw(static_cast<std::size_t>(d));
  for (int s = 0; s < depth; ++s) {
    const double outer = std::ldexp(R, -s);
    const double inner = outer / 2;
    for (const auto& box : boxes) {
      double lo[3], hi[3];
      for (int a = 0; a < d; ++a) {
        const int t = box[static_cast<std::size_t>(a)];
        lo[a] = t < 0 ? -outer : (t == 0 ? -inner : inner);
        hi[a] = t < 0 ? -inner : (t == 0 ? inner : outer);
      }
      std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
      for (;;) {
        double weight = 1;
        for (int a = 0; a < d; ++a) {
          const auto& [x, wt] = rule[idx[static_cast<std::size_t>(a)]];
          const double half = 0.5 * (hi[a] - lo[a]);
          w[static_cast<std::size_t>(a)] = lo[a] + half * (x + 1);
          mw[static_cast<std::size_t>(a)] = -w[static_cast<std::size_t>(a)];
          weight *= wt * half;
        }
        total += weight * (fn(w) + fn(mw));
        int a = d - 1;
        while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == rule.size()) idx[static_cast<std::size_t>(a--)] = 0;
        if (a < 0) break;
      }
    }
  }
  return total;
}

struct Ladder {
  int span;   // sample exponents in [-span, span]
  int depth;  // principal-value shells
};

constexpr int kDeltaMin = -4;
constexpr int kDeltaMax = 4;

std::vector<Ladder> refinements(const KernelSpec& k, const ValidationOptions& opt, std::size_t& samples) {
  const double du = static_cast<double>(directions(k.firstDim).size());
  const double dv = static_cast<double>(directions(k.secondDim).size());
  const double per = std::sqrt(static_cast<double>(opt.sampleBudget) / (du * dv));
  const int D = std::max(2, static_cast<int>((per - 1) / 2));
  samples = static_cast<std::size_t>((2 * D + 1) * (2 * D + 1) * du * dv);
  return {{D, 12}, {2 * D, 24}};
}

// Size inequality |d^a K| <= C bound(u, v); returns max ratio at one ladder.
template <class Bound>
double fit_size(const Evaluator& ev, const KernelSpec& k, const Order& o, int span, Bound bound) {
  double best = 0;
  for (const auto& du : directions(k.firstDim)) {
    for (const auto& dv : directions(k.secondDim)) {
      for (int a = -span; a <= span; ++a) {
        for (int b = -span; b <= span; ++b) {
          const Point p = concat(scaled(du, a), scaled(dv, b));
          const double au = std::ldexp(1.0, a), av = std::ldexp(1.0, b);
          best = std::max(best, std::abs(ev.derivative(p, o.axes)) / bound(au, av, o));
        }
      }
    }
  }
  return best;
}

void size_checks(const KernelSpec& k, const ValidationOptions& opt, const std::vector<Ladder>& ladders,
                 KernelReport& rep) {
  const Evaluator ev(k);
  const int d1 = k.firstDim, d2 = k.secondDim;
  for (const Order& o : orders(d1, d2, k.derivativeOrderCap, true, true)) {
    auto productBound = [d1, d2](double a, double b, const Order& ord) {
      return std::pow(a, -d1 - ord.first) * std::pow(b, -d2 - ord.second);
    };
    auto flagBound = [d1, d2](double a, double b, const Order& ord) {
      return std::pow(a, -d1 - ord.first) * std::pow(a + b, -d2 - ord.second);
    };
    std::vector<double> main, contrast;
    for (const Ladder& l : ladders) {
      if (k.type == SingularType::Product) {
        main.push_back(fit_size(ev, k, o, l.span, productBound));
      } else {
        main.push_back(fit_size(ev, k, o, l.span, flagBound));
        contrast.push_back(fit_size(ev, k, o, l.span, productBound));
      }
    }
    rep.size.push_back(finish("size " + order_label(o), main, opt.stabilityFactor));
    if (!contrast.empty()) {
      const auto c = finish("product-size " + order_label(o), contrast, opt.stabilityFactor);
      rep.productSizePassed = rep.productSizePassed && c.stable;
    }
  }
}

// Cancellation conditions shared by both geometries: (1) integrate the
// second factor against a dilated bump, (2) integrate the first factor, (3)
// integrate both with independent dilations.
void cancellation_checks(const KernelSpec& k, const ValidationOptions& opt, const std::vector<Ladder>& ladders,
                         KernelReport& rep) {
  const Evaluator ev(k);
  const int d1 = k.firstDim, d2 = k.secondDim;
  const auto bumps1 = bump_family(d1, opt.bumpSeed);
  const auto bumps2 = bump_family(d2, opt.bumpSeed);
  const auto bumps12 = bump_family(d1 + d2, opt.bumpSeed);
  const auto dirs1 = directions(d1);
  const auto dirs2 = directions(d2);

  // (1): sample the first factor, integrate the second.
  for (const Order& o : orders(d1, d2, k.derivativeOrderCap, true, false)) {
    std::vector<double> fits;
    for (const Ladder& l : ladders) {
      std::vector<std::pair<Point, int>> samples;
      for (const auto& du : dirs1) {
        for (int a = -l.span; a <= l.span; ++a) samples.push_back({scaled(du, a), a});
      }
      std::vector<double> best(samples.size(), 0.0);
      parallel_for(samples.size(), [&](std::size_t s) {
        const Point& u = samples[s].first;
        const double scale = std::pow(std::ldexp(1.0, samples[s].second), d1 + o.first);
        for (int e = kDeltaMin; e <= kDeltaMax; ++e) {
          const double delta = std::ldexp(1.0, e);
          for (const Bump& b : bumps2) {
            const cplx I = pv_integral(d2, 1.0 / delta, l.depth, opt.quadratureOrder, [&](const Point& v) {
              Point dv = v;
              for (double& x : dv) x *= delta;
              const double phi = b.value(dv);
              if (phi == 0) return cplx{};
              return ev.derivative(concat(u, v), o.axes) * phi;
            });
            best[s] = std::max(best[s], std::abs(I) * scale);
          }
        }
      });
      fits.push_back(*std::max_element(best.begin(), best.end()));
    }
    rep.cancellation.push_back(finish("cancel-first " + order_label(o), fits, opt.stabilityFactor));
  }

  // (2): sample the second factor, integrate the first.
  for (const Order& o : orders(d1, d2, k.derivativeOrderCap, false, true)) {
    std::vector<double> fits;
    for (const Ladder& l : ladders) {
      std::vector<std::pair<Point, int>> samples;
      for (const auto& dv : dirs2) {
        for (int a = -l.span; a <= l.span; ++a) samples.push_back({scaled(dv, a), a});
      }
      std::vector<double> best(samples.size(), 0.0);
      parallel_for(samples.size(), [&](std::size_t s) {
        const Point& v = samples[s].first;
        const double scale = std::pow(std::ldexp(1.0, samples[s].second), d2 + o.second);
        for (int e = kDeltaMin; e <= kDeltaMax; ++e) {
          const double delta = std::ldexp(1.0, e);
          for (const Bump& b : bumps1) {
            const cplx I = pv_integral(d1, 1.0 / delta, l.depth, opt.quadratureOrder, [&](const Point& u) {
              Point du = u;
              for (double& x : du) x *= delta;
              const double phi = b.value(du);
              if (phi == 0) return cplx{};
              return ev.derivative(concat(u, v), o.axes) * phi;
            });
            best[s] = std::max(best[s], std::abs(I) * scale);
          }
        }
      });
      fits.push_back(*std::max_element(best.begin(), best.end()));
    }
    rep.cancellation.push_back(finish("cancel-second " + order_label(o), fits, opt.stabilityFactor));
  }

  // (3): joint dilation ladder (delta1, delta2).
  {
    std::vector<double> fits;
    for (const Ladder& l : ladders) {
      const int n = kDeltaMax - kDeltaMin + 1;
      std::vector<double> best(static_cast<std::size_t>(n * n), 0.0);
      parallel_for(best.size(), [&](std::size_t c) {
        const double d1s = std::ldexp(1.0, kDeltaMin + static_cast<int>(c) / n);
        const double d2s = std::ldexp(1.0, kDeltaMin + static_cast<int>(c) % n);
        for (const Bump& b : bumps12) {
          const cplx I = pv_integral(d2, 1.0 / d2s, l.depth, opt.quadratureOrder, [&](const Point& v) {
            return pv_integral(d1, 1.0 / d1s, l.depth, opt.quadratureOrder, [&](const Point& u) {
              Point w = u;
              for (double& x : w) x *= d1s;
              for (double x : v) w.push_back(x * d2s);
              const double phi = b.value(w);
              if (phi == 0) return cplx{};
              return ev.value(concat(u, v)) * phi;
            });
          });
          best[c] = std::max(best[c], std::abs(I));
        }
      });
      fits.push_back(*std::max_element(best.begin(), best.end()));
    }
    rep.cancellation.push_back(finish("cancel-joint", fits, opt.stabilityFactor));
  }
}

KernelReport validate(const KernelSpec& k, const ValidationOptions& opt, SingularType expected) {
  if (k.type != expected) {
    throw KernelError("kernel '" + k.name + "' does not have the " +
                      (expected == SingularType::Product ? "product" : "flag") + " singular geometry");
  }
  if (!k.evaluate) throw KernelError("kernel '" + k.name + "' has no evaluator");
  if (k.firstDim < 1 || k.secondDim < 1 || k.firstDim + k.secondDim > 3) {
    throw ConfigError("kernel validation supports at most three coordinates in total");
  }
  if (k.derivativeOrderCap < 1) throw ConfigError("derivative order cap must be at least 1");
  KernelReport rep;
  rep.kernel = k.name;
  rep.geometry = k.type;
  const auto ladders = refinements(k, opt, rep.samplesPerRefinement);
  size_checks(k, opt, ladders, rep);
  cancellation_checks(k, opt, ladders, rep);
  for (const auto& c : rep.size) {
    rep.sizePassed = rep.sizePassed && c.stable;
    rep.maxSpread = std::max(rep.maxSpread, c.spread);
  }
  for (const auto& c : rep.cancellation) {
    rep.cancellationPassed = rep.cancellationPassed && c.stable;
    rep.maxSpread = std::max(rep.maxSpread, c.spread);
  }
  rep.passed = rep.sizePassed && rep.cancellationPassed;
  return rep;
}

}  // namespace

KernelReport validate_product_kernel(const KernelSpec& k, const ValidationOptions& options) {
  return validate(k, options, SingularType::Product);
}

KernelReport validate_flag_kernel(const KernelSpec& k, const ValidationOptions& options) {
  return validate(k, options, SingularType::Flag);
}

// ---------------------------------------------------------------------------
// Projection

KernelSpec project_to_flag(const KernelSpec& ksharp, const ProjectionOptions& options) {
  if (ksharp.type != SingularType::Product) throw KernelError("projection needs a product kernel");
  if (ksharp.secondDim != 1 || ksharp.firstDim < 2) {
    throw ConfigError("projection supports product kernels on R^{n+1} x R^1");
  }
  if (!ksharp.evaluate) throw KernelError("kernel has no evaluator");
  KernelSpec out;
  out.name = "proj(" + ksharp.name + ")";
  out.type = SingularType::Flag;
  out.firstDim = ksharp.firstDim - 1;
  out.secondDim = 1;
  out.truncationEps = ksharp.truncationEps;
  out.derivativeOrderCap = ksharp.derivativeOrderCap;
  const auto eval = ksharp.evaluate;
  const int n = out.firstDim;
  out.evaluate = [eval, n, options](std::span<const double> x, std::span<const double> y) -> cplx {
    using boost::math::quadrature::gauss_kronrod;
    const double yv = y[0];
    auto at = [&](double z) {
      double u[4];
      for (int i = 0; i < n; ++i) u[i] = x[static_cast<std::size_t>(i)];
      u[n] = yv - z;
      const double v[1] = {z};
      return eval(std::span<const double>(u, static_cast<std::size_t>(n + 1)), std::span<const double>(v, 1));
    };
    std::vector<double> cuts;
    double lo, hi;
    if (options.domain == ProjectionDomain::Torus) {
      lo = 0;
      hi = 1;
      double c = yv - std::floor(yv);
      if (c > 0 && c < 1) cuts.push_back(c);
    } else {
      lo = -std::numeric_limits<double>::infinity();
      hi = std::numeric_limits<double>::infinity();
      cuts.push_back(0.0);
      if (yv != 0) cuts.push_back(yv);
      std::sort(cuts.begin(), cuts.end());
    }
    std::vector<double> edges{lo};
    edges.insert(edges.end(), cuts.begin(), cuts.end());
    edges.push_back(hi);
    cplx total{};
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
      double err = 0, l1 = 0;
      const cplx v = gauss_kronrod<double, 15>::integrate(at, edges[s], edges[s + 1],
                                                          static_cast<unsigned>(options.maxDepth), options.relTol,
                                                          &err, &l1);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || err > std::max(options.absTol, options.relTol * l1)) {
        std::ostringstream msg;
        msg << "projection quadrature failed at (x0=" << x[0] << ", y=" << yv << ") on [" << edges[s] << ", "
            << edges[s + 1] << "]: estimate " << v << ", error " << err << ", L1 " << l1;
        throw IntegrationError(msg.str());
      }
      total += v;
    }
    return total;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Truncated flag convolution

std::vector<cplx> truncated_multiplier(const Grid& grid, const KernelSpec& k, double eps) {
  if (k.type != SingularType::Flag) throw KernelError("flag convolution needs a flag kernel");
  if (k.firstDim != grid.n() || k.secondDim != grid.m()) throw ShapeError("kernel dimensions do not match grid");
  if (eps < grid.spacing() * (1 - 1e-12)) throw TruncationError("truncation radius is below the grid spacing");
  const double h = grid.spacing();
  std::vector<cplx> samples(grid.size());
  std::vector<double> x(static_cast<std::size_t>(grid.n())), y(static_cast<std::size_t>(grid.m()));
  const auto side = static_cast<std::int64_t>(grid.side());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Coords c = grid.coords(i);
    double r2 = 0;
    for (int a = 0; a < grid.dims(); ++a) {
      const double v = static_cast<double>(c[a] < side / 2 ? c[a] : c[a] - side) * h;
      if (a < grid.n()) {
        x[static_cast<std::size_t>(a)] = v;
        r2 += v * v;
      } else {
        y[static_cast<std::size_t>(a - grid.n())] = v;
      }
    }
    if (std::sqrt(r2) <= eps * (1 + 1e-12)) continue;
    const cplx v = k.evaluate(x, y);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw KernelError("kernel is not finite off the cutoff");
    samples[i] = v * grid.cell_volume();
  }
  return fft_forward(grid, samples);
}

FlagConvolution flag_convolve(const SampledFunction& f, const KernelSpec& k, double eps, bool measureMajorant) {
  const Grid& grid = f.grid();
  const auto mult = truncated_multiplier(grid, k, eps);
  auto spec = fft_forward(grid, f.values());
  double peak = 0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    spec[i] *= mult[i];
    peak = std::max(peak, std::abs(mult[i]));
  }
  FlagConvolution out{SampledFunction(grid, fft_inverse(grid, spec)), peak, 0};
  if (measureMajorant) {
    const FilterBank bank = build_filter_bank(grid, FilterProfile{}, 1);
    const auto ms = strong_maximal(f);
    const auto tspec = fft_forward(grid, out.output.values());
    for (int j = bank.j_range().lo; j <= bank.j_range().hi; ++j) {
      for (int kk = bank.k_range().lo; kk <= bank.k_range().hi; ++kk) {
        if (bank.channel_is_zero(j, kk)) continue;
        const auto conv = channel_from_spectrum(bank, tspec, j, kk);
        for (std::size_t i = 0; i < conv.size(); ++i) {
          const double m = ms[i].real();
          if (m > 0) out.majorantConstant = std::max(out.majorantConstant, std::abs(conv[i]) / m);
        }
      }
    }
  }
  return out;
}

}  // namespace flaglp
