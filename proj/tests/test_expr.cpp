#include "doctest.h"
#include "mvldp/expr.hpp"

#include <cmath>
#include <random>

using namespace mvldp::expr;

namespace {

// Reference evaluator, written independently of the library's eval switch.
double ref_eval(const Node* nd, const double* x, const double* y) {
  using K = Node::Kind;
  if (nd->kind == K::Number) return nd->number;
  if (nd->kind == K::VarX) return x[nd->index];
  if (nd->kind == K::VarY) return y[nd->index];
  if (nd->kind == K::Neg) return -ref_eval(nd->a.get(), x, y);
  const double a = ref_eval(nd->a.get(), x, y);
  if (nd->kind == K::Call && !nd->b) {
    switch (nd->func) {
      case Func::Sin: return std::sin(a);
      case Func::Cos: return std::cos(a);
      case Func::Exp: return std::exp(a);
      case Func::Tanh: return std::tanh(a);
      case Func::Abs: return std::fabs(a);
      case Func::Log:
        if (a <= 0) throw EvalError("ref: log domain");
        return std::log(a);
      case Func::Sqrt:
        if (a < 0) throw EvalError("ref: sqrt domain");
        return std::sqrt(a);
      default: throw EvalError("ref: bad unary");
    }
  }
  const double b = ref_eval(nd->b.get(), x, y);
  switch (nd->kind) {
    case K::Add: return a + b;
    case K::Sub: return a - b;
    case K::Mul: return a * b;
    case K::Div:
      if (b == 0) throw EvalError("ref: div by zero");
      return a / b;
    case K::Pow:
      if (a < 0 && b != std::floor(b)) throw EvalError("ref: pow domain");
      if (a == 0 && b < 0) throw EvalError("ref: pow domain");
      return std::pow(a, b);
    case K::Call:
      return nd->func == Func::Min ? std::min(a, b) : std::max(a, b);
    default: throw EvalError("ref: bad node");
  }
}

// Random ASTs for the round-trip and evaluator-agreement properties.  Every
// operator node keeps at least one variable underneath so the parser's
// constant folding cannot rewrite the tree, and Neg never wraps a bare
// literal for the same reason.
Ast random_ast(std::mt19937& gen, int depth) {
  std::uniform_real_distribution<double> num(-2.5, 2.5);
  std::uniform_int_distribution<int> leaf(0, 4), op(0, 7), fn(0, 8);
  auto mk = [](Node n) { return std::make_shared<Node>(std::move(n)); };
  if (depth == 0 || leaf(gen) == 0) {
    const int pick = leaf(gen);
    Node n;
    if (pick <= 1) {
      n.kind = Node::Kind::Number;
      n.number = num(gen);
    } else if (pick <= 3) {
      n.kind = Node::Kind::VarX;
      n.index = pick - 2;
    } else {
      n.kind = Node::Kind::VarY;
      n.index = 0;
    }
    return mk(n);
  }
  for (;;) {
    Node n;
    const int o = op(gen);
    n.a = random_ast(gen, depth - 1);
    if (o < 5) {
      n.kind = static_cast<Node::Kind>(static_cast<int>(Node::Kind::Add) + o);
      n.b = random_ast(gen, depth - 1);
    } else if (o == 5) {
      n.kind = Node::Kind::Neg;
    } else {
      n.kind = Node::Kind::Call;
      n.func = static_cast<Func>(fn(gen));
      if (n.func == Func::Min || n.func == Func::Max)
        n.b = random_ast(gen, depth - 1);
    }
    Ast out = mk(n);
    if (depends_on_x(out) || depends_on_y(out)) return out;
  }
}

}  // namespace

TEST_CASE("parse and eval basics") {
  const Dims d{1, 1};
  Eigen::VectorXd x(1), y(1);
  x << 0.0;
  y << 0.0;

  auto cosy = parse("cos(y0)", d);
  CHECK(eval(cosy, x.data(), y.data()) == 1.0);

  auto drift = parse("r - 0.5*cos(y0)^2", d, {{"r", 0.1}});
  CHECK(eval(drift, x.data(), y.data()) == doctest::Approx(-0.4).epsilon(1e-15));
}

TEST_CASE("matrix field evaluates entrywise") {
  const Dims d{1, 1};
  auto f = CoeffField::matrix_field({{"cos(y0)", "0"}, {"0", "exp(x0)"}}, d);
  Eigen::VectorXd x(1), y(1);
  x << 0.0;
  y << 0.0;
  Eigen::MatrixXd m = f.eval_matrix(x, y);
  CHECK(m.rows() == 2);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 0) == 0.0);
  CHECK(m(1, 1) == 1.0);
}

TEST_CASE("syntax error carries byte offset") {
  try {
    parse("cos(", Dims{0, 1});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset == 4);
  }
}

TEST_CASE("identifier and arity diagnostics") {
  CHECK_THROWS_AS(parse("x3", Dims{2, 0}), ParseError);
  CHECK_THROWS_AS(parse("min(x0, x1, x0)", Dims{2, 0}), ParseError);
  CHECK_THROWS_AS(parse("foo + 1", Dims{1, 0}), ParseError);
  CHECK_THROWS_AS(parse("sigmoid(x0)", Dims{1, 0}), ParseError);
  CHECK_THROWS_AS(parse("y0", Dims{1, 0}), ParseError);  // h must be x-only
}

TEST_CASE("domain errors, no NaN propagation") {
  const Dims d{1, 0};
  double xv = -1.0;
  CHECK_THROWS_AS(eval(parse("log(x0)", d), &xv, nullptr), EvalError);
  CHECK_THROWS_AS(eval(parse("sqrt(x0)", d), &xv, nullptr), EvalError);
  CHECK_THROWS_AS(eval(parse("x0^0.5", d), &xv, nullptr), EvalError);
  xv = 0.0;
  CHECK_THROWS_AS(eval(parse("1/x0", d), &xv, nullptr), EvalError);
  xv = 2.0;
  CHECK(eval(parse("x0^2", d), &xv, nullptr) == 4.0);
  xv = -2.0;
  CHECK(eval(parse("x0^2", d), &xv, nullptr) == 4.0);  // integer exponent ok
}

TEST_CASE("field entry index in domain errors") {
  auto f = CoeffField::matrix_field({{"1", "log(y0)"}}, Dims{0, 1});
  Eigen::VectorXd x(0), y(1);
  y << -1.0;
  try {
    f.eval_matrix(x, y);
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    CHECK(e.entry == 1);
  }
}

TEST_CASE("precedence and associativity") {
  const Dims d{1, 0};
  double xv = 3.0;
  CHECK(eval(parse("2^3^2", d), &xv, nullptr) == 512.0);      // right-assoc
  CHECK(eval(parse("-x0^2", d), &xv, nullptr) == -9.0);       // neg below ^
  CHECK(eval(parse("2*x0+1", d), &xv, nullptr) == 7.0);
  CHECK(eval(parse("2+x0*2", d), &xv, nullptr) == 8.0);
  CHECK(eval(parse("2*x0^2", d), &xv, nullptr) == 18.0);
  CHECK(eval(parse("(2+x0)*2", d), &xv, nullptr) == 10.0);
  CHECK(eval(parse("2 - 3 - x0", d), &xv, nullptr) == -4.0);  // left-assoc
}

TEST_CASE("parameters substitute and fold at parse time") {
  auto ast = parse("r*2", Dims{0, 0}, {{"r", 1.5}});
  CHECK(ast->kind == Node::Kind::Number);
  CHECK(ast->number == 3.0);
  CHECK(to_string(ast) == "3");

  // pow() canonicalizes to the ^ operator.
  auto a = parse("pow(x0, 2)", Dims{1, 0});
  auto b = parse("x0^2", Dims{1, 0});
  CHECK(equal(a, b));
}

TEST_CASE("dependency scan") {
  auto f = CoeffField::scalar("cos(y0) + 1", Dims{1, 1});
  CHECK(!f.depends_on_x());
  CHECK(f.depends_on_y());
  auto g = CoeffField::scalar("x0*y0", Dims{1, 1});
  CHECK(g.depends_on_x());
  CHECK(g.depends_on_y());
}

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(CoeffField::matrix_field({{"1", "2"}, {"3"}}, Dims{0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(CoeffField::vector_field({}, Dims{0, 0}),
                  std::invalid_argument);
}

TEST_CASE("property: pretty-print round-trips to an identical AST") {
  std::mt19937 gen(77);
  const Dims d{2, 1};
  for (int i = 0; i < 100; ++i) {
    Ast ast = random_ast(gen, 4);
    const std::string printed = to_string(ast);
    CAPTURE(printed);
    Ast back = parse(printed, d);
    CHECK(equal(ast, back));
    CHECK(to_string(back) == printed);
  }
}

TEST_CASE("property: eval agrees with the reference evaluator") {
  std::mt19937 gen(1234);
  std::uniform_real_distribution<double> point(-2.0, 2.0);
  const int trials = 1000;
  int compared = 0;
  for (int i = 0; i < trials; ++i) {
    Ast ast = random_ast(gen, 4);
    double x[2] = {point(gen), point(gen)};
    double y[1] = {point(gen)};
    bool lib_threw = false, ref_threw = false;
    double lib = 0, ref = 0;
    try {
      lib = eval(ast, x, y);
    } catch (const EvalError&) {
      lib_threw = true;
    }
    try {
      ref = ref_eval(ast.get(), x, y);
    } catch (const EvalError&) {
      ref_threw = true;
    }
    CAPTURE(to_string(ast));
    CHECK(lib_threw == ref_threw);
    if (!lib_threw && std::isfinite(lib) && std::isfinite(ref)) {
      CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
      ++compared;
    }
  }
  CHECK(compared > trials / 2);
}
