#include "mvldp/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

namespace mvldp::expr {

namespace {

struct FuncInfo {
  const char* name;
  Func func;
  int arity;
};

// pow is absent here: it parses straight to the Pow operator node.
constexpr FuncInfo kFuncs[] = {
    {"sin", Func::Sin, 1},  {"cos", Func::Cos, 1},   {"exp", Func::Exp, 1},
    {"log", Func::Log, 1},  {"sqrt", Func::Sqrt, 1}, {"abs", Func::Abs, 1},
    {"tanh", Func::Tanh, 1}, {"min", Func::Min, 2},  {"max", Func::Max, 2},
};

const FuncInfo* find_func(const std::string& name) {
  for (const auto& f : kFuncs)
    if (name == f.name) return &f;
  return nullptr;
}

double eval_node(const Node* nd, const double* x, const double* y);

double apply_func(Func f, double a, double b) {
  switch (f) {
    case Func::Sin: return std::sin(a);
    case Func::Cos: return std::cos(a);
    case Func::Exp: return std::exp(a);
    case Func::Tanh: return std::tanh(a);
    case Func::Abs: return std::abs(a);
    case Func::Log:
      if (a <= 0.0) throw EvalError("log of non-positive argument");
      return std::log(a);
    case Func::Sqrt:
      if (a < 0.0) throw EvalError("sqrt of negative argument");
      return std::sqrt(a);
    case Func::Min: return std::min(a, b);
    case Func::Max: return std::max(a, b);
  }
  throw EvalError("unreachable function id");
}

double eval_node(const Node* nd, const double* x, const double* y) {
  switch (nd->kind) {
    case Node::Kind::Number: return nd->number;
    case Node::Kind::VarX: return x[nd->index];
    case Node::Kind::VarY: return y[nd->index];
    case Node::Kind::Neg: return -eval_node(nd->a.get(), x, y);
    case Node::Kind::Add:
      return eval_node(nd->a.get(), x, y) + eval_node(nd->b.get(), x, y);
    case Node::Kind::Sub:
      return eval_node(nd->a.get(), x, y) - eval_node(nd->b.get(), x, y);
    case Node::Kind::Mul:
      return eval_node(nd->a.get(), x, y) * eval_node(nd->b.get(), x, y);
    case Node::Kind::Div: {
      const double den = eval_node(nd->b.get(), x, y);
      if (den == 0.0) throw EvalError("division by zero");
      return eval_node(nd->a.get(), x, y) / den;
    }
    case Node::Kind::Pow: {
      const double base = eval_node(nd->a.get(), x, y);
      const double expo = eval_node(nd->b.get(), x, y);
      if (base < 0.0 && expo != std::floor(expo))
        throw EvalError("fractional power of negative base");
      if (base == 0.0 && expo < 0.0)
        throw EvalError("zero base with negative exponent");
      return std::pow(base, expo);
    }
    case Node::Kind::Call:
      return apply_func(nd->func, eval_node(nd->a.get(), x, y),
                        nd->b ? eval_node(nd->b.get(), x, y) : 0.0);
  }
  throw EvalError("unreachable node kind");
}

Ast make_number(double v) {
  auto nd = std::make_shared<Node>();
  nd->kind = Node::Kind::Number;
  nd->number = v;
  return nd;
}

bool is_number(const Ast& a) { return a->kind == Node::Kind::Number; }

// Folds constant subtrees; leaves the node intact when evaluation would fail
// or overflow, so the error surfaces at eval time instead.
Ast make_op(Node::Kind kind, Func func, Ast a, Ast b) {
  auto nd = std::make_shared<Node>();
  nd->kind = kind;
  nd->func = func;
  nd->a = std::move(a);
  nd->b = std::move(b);
  const bool const_args =
      is_number(nd->a) && (!nd->b || is_number(nd->b));
  if (const_args) {
    try {
      const double v = eval_node(nd.get(), nullptr, nullptr);
      if (std::isfinite(v)) return make_number(v);
    } catch (const EvalError&) {
    }
  }
  return nd;
}

struct Token {
  enum class Kind { Number, Ident, Op, LParen, RParen, Comma, End };
  Kind kind = Kind::End;
  double number = 0.0;
  std::string text;
  char op = 0;
  std::size_t offset = 0;
};

class Parser {
 public:
  Parser(const std::string& src, const Dims& dims, const Params& params)
      : src_(src), dims_(dims), params_(params) {
    advance();
  }

  Ast run() {
    Ast ast = parse_expr(0);
    if (tok_.kind != Token::Kind::End)
      throw ParseError("unexpected trailing input", tok_.offset);
    return ast;
  }

 private:
  static int binary_prec(char op) {
    switch (op) {
      case '+': case '-': return 10;
      case '*': case '/': return 20;
      case '^': return 30;
      default: return -1;
    }
  }

  Ast parse_expr(int min_prec) {
    Ast lhs = parse_primary();
    while (tok_.kind == Token::Kind::Op) {
      const char op = tok_.op;
      const int prec = binary_prec(op);
      if (prec < min_prec) break;
      advance();
      // ^ is right-associative, the rest associate left.
      Ast rhs = parse_expr(op == '^' ? prec : prec + 1);
      switch (op) {
        case '+': lhs = make_op(Node::Kind::Add, Func::Sin, lhs, rhs); break;
        case '-': lhs = make_op(Node::Kind::Sub, Func::Sin, lhs, rhs); break;
        case '*': lhs = make_op(Node::Kind::Mul, Func::Sin, lhs, rhs); break;
        case '/': lhs = make_op(Node::Kind::Div, Func::Sin, lhs, rhs); break;
        case '^': lhs = make_op(Node::Kind::Pow, Func::Sin, lhs, rhs); break;
      }
    }
    return lhs;
  }

  Ast parse_primary() {
    const Token t = tok_;
    switch (t.kind) {
      case Token::Kind::Number:
        advance();
        return make_number(t.number);
      case Token::Kind::Op:
        if (t.op == '-') {
          advance();
          // Unary minus binds below ^ and above * /.
          return make_op(Node::Kind::Neg, Func::Sin, parse_expr(25), nullptr);
        }
        throw ParseError("expected expression", t.offset);
      case Token::Kind::LParen: {
        advance();
        Ast inner = parse_expr(0);
        expect(Token::Kind::RParen, "expected ')'");
        return inner;
      }
      case Token::Kind::Ident:
        return parse_ident(t);
      default:
        throw ParseError("expected expression", t.offset);
    }
  }

  Ast parse_ident(const Token& t) {
    advance();
    if (tok_.kind == Token::Kind::LParen) return parse_call(t);

    int index = 0;
    if (variable_index(t.text, 'x', index)) {
      if (index >= dims_.n)
        throw ParseError("unknown identifier '" + t.text +
                             "' (slow dimension is " +
                             std::to_string(dims_.n) + ")",
                         t.offset);
      auto nd = std::make_shared<Node>();
      nd->kind = Node::Kind::VarX;
      nd->index = index;
      return nd;
    }
    if (variable_index(t.text, 'y', index)) {
      if (index >= dims_.m)
        throw ParseError("unknown identifier '" + t.text +
                             "' (fast dimension is " +
                             std::to_string(dims_.m) + ")",
                         t.offset);
      auto nd = std::make_shared<Node>();
      nd->kind = Node::Kind::VarY;
      nd->index = index;
      return nd;
    }
    if (auto it = params_.find(t.text); it != params_.end())
      return make_number(it->second);
    throw ParseError("unknown identifier '" + t.text + "'", t.offset);
  }

  Ast parse_call(const Token& name) {
    const bool is_pow = name.text == "pow";
    const FuncInfo* info = find_func(name.text);
    if (!info && !is_pow)
      throw ParseError("unknown function '" + name.text + "'", name.offset);
    const int arity = is_pow ? 2 : info->arity;

    advance();  // consume '('
    std::vector<Ast> args;
    if (tok_.kind != Token::Kind::RParen) {
      args.push_back(parse_expr(0));
      while (tok_.kind == Token::Kind::Comma) {
        advance();
        args.push_back(parse_expr(0));
      }
    }
    const std::size_t close_off = tok_.offset;
    expect(Token::Kind::RParen, "expected ')'");
    if (static_cast<int>(args.size()) != arity)
      throw ParseError("'" + name.text + "' expects " +
                           std::to_string(arity) + " argument(s), got " +
                           std::to_string(args.size()),
                       close_off);
    if (is_pow)
      return make_op(Node::Kind::Pow, Func::Sin, args[0], args[1]);
    return make_op(Node::Kind::Call, info->func, args[0],
                   arity == 2 ? args[1] : nullptr);
  }

  static bool variable_index(const std::string& text, char prefix, int& out) {
    if (text.size() < 2 || text[0] != prefix) return false;
    for (std::size_t i = 1; i < text.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    out = std::atoi(text.c_str() + 1);
    return true;
  }

  void expect(Token::Kind kind, const char* msg) {
    if (tok_.kind != kind) throw ParseError(msg, tok_.offset);
    advance();
  }

  void advance() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    tok_ = Token{};
    tok_.offset = pos_;
    if (pos_ >= src_.size()) {
      tok_.kind = Token::Kind::End;
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.c_str() + pos_;
      char* end = nullptr;
      tok_.number = std::strtod(begin, &end);
      if (end == begin) throw ParseError("malformed number", pos_);
      tok_.kind = Token::Kind::Number;
      pos_ += static_cast<std::size_t>(end - begin);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) ||
              src_[end] == '_'))
        ++end;
      tok_.kind = Token::Kind::Ident;
      tok_.text = src_.substr(pos_, end - pos_);
      pos_ = end;
      return;
    }
    switch (c) {
      case '+': case '-': case '*': case '/': case '^':
        tok_.kind = Token::Kind::Op;
        tok_.op = c;
        break;
      case '(': tok_.kind = Token::Kind::LParen; break;
      case ')': tok_.kind = Token::Kind::RParen; break;
      case ',': tok_.kind = Token::Kind::Comma; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'",
                         pos_);
    }
    ++pos_;
  }

  const std::string& src_;
  Dims dims_;
  const Params& params_;
  std::size_t pos_ = 0;
  Token tok_;
};

int node_prec(const Node* nd) {
  switch (nd->kind) {
    case Node::Kind::Add: case Node::Kind::Sub: return 10;
    case Node::Kind::Mul: case Node::Kind::Div: return 20;
    case Node::Kind::Neg: return 25;
    case Node::Kind::Pow: return 30;
    case Node::Kind::Number:
      // A negative literal reparses through unary minus, so for bracketing it
      // behaves like a Neg node.
      return nd->number < 0.0 ? 25 : 100;
    default: return 100;
  }
}

void format_number(double v, std::string& out) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

const char* func_name(Func f) {
  for (const auto& info : kFuncs)
    if (info.func == f) return info.name;
  return "?";
}

void print_node(const Node* nd, std::string& out);

void print_child(const Node* child, int min_prec, std::string& out) {
  const bool parens = node_prec(child) < min_prec;
  if (parens) out += '(';
  print_node(child, out);
  if (parens) out += ')';
}

void print_node(const Node* nd, std::string& out) {
  switch (nd->kind) {
    case Node::Kind::Number: format_number(nd->number, out); return;
    case Node::Kind::VarX:
      out += 'x';
      out += std::to_string(nd->index);
      return;
    case Node::Kind::VarY:
      out += 'y';
      out += std::to_string(nd->index);
      return;
    case Node::Kind::Neg:
      out += '-';
      print_child(nd->a.get(), 25, out);
      return;
    case Node::Kind::Add:
      print_child(nd->a.get(), 10, out);
      out += " + ";
      print_child(nd->b.get(), 11, out);
      return;
    case Node::Kind::Sub:
      print_child(nd->a.get(), 10, out);
      out += " - ";
      print_child(nd->b.get(), 11, out);
      return;
    case Node::Kind::Mul:
      print_child(nd->a.get(), 20, out);
      out += '*';
      print_child(nd->b.get(), 21, out);
      return;
    case Node::Kind::Div:
      print_child(nd->a.get(), 20, out);
      out += '/';
      print_child(nd->b.get(), 21, out);
      return;
    case Node::Kind::Pow:
      print_child(nd->a.get(), 31, out);
      out += '^';
      print_child(nd->b.get(), 30, out);
      return;
    case Node::Kind::Call:
      out += func_name(nd->func);
      out += '(';
      print_node(nd->a.get(), out);
      if (nd->b) {
        out += ", ";
        print_node(nd->b.get(), out);
      }
      out += ')';
      return;
  }
}

bool scan_var(const Node* nd, Node::Kind var) {
  if (!nd) return false;
  if (nd->kind == var) return true;
  return (nd->a && scan_var(nd->a.get(), var)) ||
         (nd->b && scan_var(nd->b.get(), var));
}

}  // namespace

Ast parse(const std::string& src, const Dims& dims, const Params& params) {
  return Parser(src, dims, params).run();
}

double eval(const Ast& ast, const double* x, const double* y) {
  return eval_node(ast.get(), x, y);
}

std::string to_string(const Ast& ast) {
  std::string out;
  print_node(ast.get(), out);
  return out;
}

bool depends_on_x(const Ast& ast) { return scan_var(ast.get(), Node::Kind::VarX); }
bool depends_on_y(const Ast& ast) { return scan_var(ast.get(), Node::Kind::VarY); }

bool equal(const Ast& lhs, const Ast& rhs) {
  if (lhs == rhs) return true;
  if (!lhs || !rhs) return false;
  if (lhs->kind != rhs->kind) return false;
  switch (lhs->kind) {
    case Node::Kind::Number: return lhs->number == rhs->number;
    case Node::Kind::VarX:
    case Node::Kind::VarY: return lhs->index == rhs->index;
    case Node::Kind::Call:
      if (lhs->func != rhs->func) return false;
      [[fallthrough]];
    default:
      return equal(lhs->a, rhs->a) && equal(lhs->b, rhs->b);
  }
}

CoeffField CoeffField::scalar(const std::string& src, const Dims& dims,
                              const Params& params) {
  CoeffField f;
  f.dims_ = dims;
  f.rows_ = f.cols_ = 1;
  f.entries_.push_back(parse(src, dims, params));
  return f;
}

CoeffField CoeffField::vector_field(const std::vector<std::string>& src,
                                    const Dims& dims, const Params& params) {
  if (src.empty()) throw std::invalid_argument("empty vector field");
  CoeffField f;
  f.dims_ = dims;
  f.rows_ = static_cast<int>(src.size());
  f.cols_ = 1;
  for (const auto& s : src) f.entries_.push_back(parse(s, dims, params));
  return f;
}

CoeffField CoeffField::matrix_field(
    const std::vector<std::vector<std::string>>& src, const Dims& dims,
    const Params& params) {
  if (src.empty() || src[0].empty())
    throw std::invalid_argument("empty matrix field");
  CoeffField f;
  f.dims_ = dims;
  f.rows_ = static_cast<int>(src.size());
  f.cols_ = static_cast<int>(src[0].size());
  f.entries_.resize(static_cast<std::size_t>(f.rows_) * f.cols_);
  for (int r = 0; r < f.rows_; ++r) {
    if (static_cast<int>(src[r].size()) != f.cols_)
      throw std::invalid_argument("ragged matrix field");
    for (int c = 0; c < f.cols_; ++c)
      f.entries_[static_cast<std::size_t>(r) * f.cols_ + c] =
          parse(src[r][c], dims, params);
  }
  return f;
}

bool CoeffField::depends_on_x() const {
  for (const auto& e : entries_)
    if (expr::depends_on_x(e)) return true;
  return false;
}

bool CoeffField::depends_on_y() const {
  for (const auto& e : entries_)
    if (expr::depends_on_y(e)) return true;
  return false;
}

void CoeffField::eval(const double* x, const double* y, double* out) const {
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const int lin = r * cols_ + c;
      try {
        out[c * rows_ + r] = eval_node(entries_[lin].get(), x, y);
      } catch (const EvalError& e) {
        throw EvalError(std::string(e.what()) + " in field entry " +
                            std::to_string(lin),
                        lin);
      }
    }
  }
}

double CoeffField::eval_scalar(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) const {
  double v;
  eval(x.data(), y.data(), &v);
  return v;
}

Eigen::VectorXd CoeffField::eval_vector(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(rows_);
  eval(x.data(), y.data(), out.data());
  return out;
}

Eigen::MatrixXd CoeffField::eval_matrix(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) const {
  Eigen::MatrixXd out(rows_, cols_);
  eval(x.data(), y.data(), out.data());
  return out;
}

}  // namespace mvldp::expr
