#ifndef MVLDP_EXPR_HPP
#define MVLDP_EXPR_HPP

#include <Eigen/Core>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvldp::expr {

// Thrown on malformed source; offset is the byte position in the source.
struct ParseError : std::runtime_error {
  std::size_t offset;
  ParseError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " at offset " + std::to_string(off)),
        offset(off) {}
};

// Thrown when evaluation leaves the function domain (log/sqrt of a negative
// argument, division by zero, negative base under a fractional power).
// entry is the linear index of the offending field entry, -1 for a bare AST.
struct EvalError : std::runtime_error {
  int entry;
  explicit EvalError(const std::string& msg, int ent = -1)
      : std::runtime_error(msg), entry(ent) {}
};

// Dimensions visible to an expression: slow variables x0..x{n-1} and fast
// variables y0..y{m-1}.
struct Dims {
  int n = 0;
  int m = 0;
};

enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs, Tanh, Min, Max };

struct Node;
using Ast = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Number, VarX, VarY, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Number;
  double number = 0.0;
  int index = 0;           // variable index for VarX / VarY
  Func func = Func::Sin;   // for Call
  Ast a, b;                // operands; b is null for unary calls
};

using Params = std::map<std::string, double>;

// Parses one expression.  Parameters are substituted as numeric literals and
// constant subexpressions are folded, so the returned tree references only
// variables admitted by dims.
Ast parse(const std::string& src, const Dims& dims, const Params& params = {});

double eval(const Ast& ast, const double* x, const double* y);

// Prints with the minimal parentheses that preserve the tree structure, so
// parse(to_string(ast)) reproduces ast node for node.
std::string to_string(const Ast& ast);

bool depends_on_x(const Ast& ast);
bool depends_on_y(const Ast& ast);
bool equal(const Ast& lhs, const Ast& rhs);

// Rectangular array of expressions evaluated against one (x, y) context.
// Shapes: scalar (1x1), vector (rows x 1), matrix (rows x cols).
class CoeffField {
 public:
  CoeffField() = default;

  static CoeffField scalar(const std::string& src, const Dims& dims,
                           const Params& params = {});
  static CoeffField vector_field(const std::vector<std::string>& src,
                                 const Dims& dims, const Params& params = {});
  static CoeffField matrix_field(
      const std::vector<std::vector<std::string>>& src, const Dims& dims,
      const Params& params = {});

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Dims& dims() const { return dims_; }
  bool empty() const { return entries_.empty(); }
  const Ast& entry(int r, int c) const { return entries_[r * cols_ + c]; }

  bool depends_on_x() const;
  bool depends_on_y() const;

  // Column-major fill of out[0..rows*cols); domain failures are reported with
  // the linear entry index.
  void eval(const double* x, const double* y, double* out) const;

  double eval_scalar(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  Eigen::VectorXd eval_vector(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y) const;
  Eigen::MatrixXd eval_matrix(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y) const;

 private:
  Dims dims_;
  int rows_ = 0, cols_ = 0;
  std::vector<Ast> entries_;
};

}  // namespace mvldp::expr

#endif
