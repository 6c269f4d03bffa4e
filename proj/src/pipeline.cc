#include "tileguide/pipeline.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tileguide/error.h"

namespace tileguide {

const char* to_string(error_kind k) {
  switch (k) {
  case error_kind::syntax: return "syntax error";
  case error_kind::unknown_identifier: return "unknown identifier";
  case error_kind::arity_mismatch: return "arity mismatch";
  case error_kind::cyclic_dependency: return "cyclic dependency";
  case error_kind::non_affine_access: return "non-affine access";
  case error_kind::invalid_pipeline: return "invalid pipeline";
  case error_kind::no_dependency: return "no direct dependency";
  case error_kind::invalid_position: return "invalid position";
  case error_kind::out_of_range: return "out of range";
  case error_kind::tiling_not_applicable: return "tiling not applicable";
  case error_kind::lowering: return "lowering error";
  case error_kind::read_out_of_region: return "read out of region";
  case error_kind::missing_input: return "missing input";
  case error_kind::invalid_schedule: return "invalid schedule";
  case error_kind::stale_option: return "stale option";
  case error_kind::empty_history: return "empty history";
  case error_kind::session_done: return "session done";
  case error_kind::io: return "i/o error";
  }
  return "error";
}

const char* error_code(error_kind k) {
  switch (k) {
  case error_kind::syntax: return "syntax";
  case error_kind::unknown_identifier: return "unknown_identifier";
  case error_kind::arity_mismatch: return "arity_mismatch";
  case error_kind::cyclic_dependency: return "cyclic_dependency";
  case error_kind::non_affine_access: return "non_affine_access";
  case error_kind::invalid_pipeline: return "invalid_pipeline";
  case error_kind::no_dependency: return "no_dependency";
  case error_kind::invalid_position: return "invalid_position";
  case error_kind::out_of_range: return "out_of_range";
  case error_kind::tiling_not_applicable: return "tiling_not_applicable";
  case error_kind::lowering: return "lowering";
  case error_kind::read_out_of_region: return "read_out_of_region";
  case error_kind::missing_input: return "missing_input";
  case error_kind::invalid_schedule: return "invalid_schedule";
  case error_kind::stale_option: return "stale_option";
  case error_kind::empty_history: return "empty_history";
  case error_kind::session_done: return "session_done";
  case error_kind::io: return "io";
  }
  return "error";
}

int dim_slot(std::string_view name) {
  if (name == "x") return 0;
  if (name == "y") return 1;
  if (name == "c") return 2;
  return -1;
}

const char* dim_name(int slot) {
  static const char* names[] = {"x", "y", "c"};
  return names[slot];
}

expr make_literal(double v) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::literal;
  n->value = v;
  return n;
}

expr make_param(std::string name) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::param;
  n->name = std::move(name);
  return n;
}

expr make_var(std::string name) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::var;
  n->name = std::move(name);
  return n;
}

expr make_access(std::string name, std::vector<index_term> index) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::access;
  n->name = std::move(name);
  n->index = std::move(index);
  return n;
}

expr make_binary(binary_op op, expr a, expr b) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::binary;
  n->op = op;
  n->args = {std::move(a), std::move(b)};
  return n;
}

expr make_call(intrinsic fn, expr a) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::call;
  n->fn = fn;
  n->args = {std::move(a)};
  return n;
}

bool structurally_equal(const expr& a, const expr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
  case expr_kind::literal: return a->value == b->value || (std::isnan(a->value) && std::isnan(b->value));
  case expr_kind::param:
  case expr_kind::var: return a->name == b->name;
  case expr_kind::access: return a->name == b->name && a->index == b->index;
  case expr_kind::binary:
    return a->op == b->op && structurally_equal(a->args[0], b->args[0]) && structurally_equal(a->args[1], b->args[1]);
  case expr_kind::call: return a->fn == b->fn && structurally_equal(a->args[0], b->args[0]);
  }
  return false;
}

interval hull(const interval& a, const interval& b) { return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)}; }

std::int64_t extent::points() const {
  std::int64_t n = 1;
  for (std::int64_t s : sizes) n *= s;
  return n;
}

std::string to_string(const extent& e) {
  std::string s;
  for (std::size_t i = 0; i < e.sizes.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(e.sizes[i]);
  }
  return s;
}

const func_def* pipeline::find_func(std::string_view n) const {
  for (const func_def& f : funcs) {
    if (f.name == n) return &f;
  }
  return nullptr;
}

const input_def* pipeline::find_input(std::string_view n) const {
  for (const input_def& i : inputs) {
    if (i.name == n) return &i;
  }
  return nullptr;
}

std::optional<double> pipeline::param(std::string_view n) const {
  for (const auto& [name, value] : params) {
    if (name == n) return value;
  }
  return std::nullopt;
}

const std::vector<std::string>& pipeline::dims_of(std::string_view n) const {
  if (const func_def* f = find_func(n)) return f->dims;
  if (const input_def* i = find_input(n)) return i->dims;
  throw error(error_kind::unknown_identifier, "unknown func '" + std::string(n) + "'");
}

int pipeline::declaration_index(std::string_view n) const {
  for (std::size_t i = 0; i < funcs.size(); ++i) {
    if (funcs[i].name == n) return static_cast<int>(i);
  }
  return -1;
}

bool structurally_equal(const pipeline& a, const pipeline& b) {
  if (a.name != b.name || a.params != b.params || a.output != b.output || a.output_extent != b.output_extent) {
    return false;
  }
  if (a.inputs.size() != b.inputs.size() || a.funcs.size() != b.funcs.size()) return false;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const input_def& x = a.inputs[i];
    const input_def& y = b.inputs[i];
    if (x.name != y.name || x.dims != y.dims || x.size != y.size) return false;
  }
  for (std::size_t i = 0; i < a.funcs.size(); ++i) {
    const func_def& x = a.funcs[i];
    const func_def& y = b.funcs[i];
    if (x.name != y.name || x.dims != y.dims || x.kind != y.kind || x.clamped_input != y.clamped_input) return false;
    if (!structurally_equal(x.body, y.body)) return false;
  }
  return true;
}

namespace {

[[noreturn]] void fail(error_kind kind, const source_span& at, const std::string& message) {
  throw error(kind, std::to_string(at.line) + ":" + std::to_string(at.col) + ": " + message);
}

enum class token_kind { ident, number, punct, end };

struct token {
  token_kind kind = token_kind::end;
  std::string text;
  int col = 0;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::vector<token> tokenize(std::string_view line, int line_no) {
  std::vector<token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    token t;
    t.col = static_cast<int>(i) + 1;
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < line.size() && is_ident_char(line[j])) ++j;
      t.kind = token_kind::ident;
      t.text = std::string(line.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < line.size() && std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      if (j < line.size() && line[j] == '.') {
        ++j;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      }
      if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
        if (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) {
          j = k;
          while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        }
      }
      t.kind = token_kind::number;
      t.text = std::string(line.substr(i, j - i));
      i = j;
    } else if (std::string_view("()=,:+-*/").find(c) != std::string_view::npos) {
      t.kind = token_kind::punct;
      t.text = std::string(1, c);
      ++i;
    } else {
      fail(error_kind::syntax, {line_no, t.col, t.col}, std::string("unexpected character '") + c + "'");
    }
    tokens.push_back(std::move(t));
  }
  token end;
  end.col = static_cast<int>(line.size()) + 1;
  tokens.push_back(end);
  return tokens;
}

double parse_number(const std::string& text) { return std::strtod(text.c_str(), nullptr); }

bool is_integer_literal(const std::string& text) {
  return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

struct declaration {
  enum class kind { input, clamp, func } what;
  std::string name;
  std::vector<std::string> dims;
  std::string clamped;
  int line = 0;
  int name_col = 0;
  // Tokens of the definition body (func only).
  std::vector<token> body;
  std::size_t body_start = 0;
};

class expr_parser {
public:
  expr_parser(const std::vector<token>& tokens, std::size_t pos, int line, const std::vector<std::string>& vars,
              const std::map<std::string, std::vector<std::string>>& dims_by_name, const std::set<std::string>& params)
      : tokens_(tokens), pos_(pos), line_(line), vars_(vars), dims_by_name_(dims_by_name), params_(params) {}

  expr parse_all() {
    expr e = parse_sum();
    if (peek().kind != token_kind::end) {
      fail(error_kind::syntax, span_of(peek()), "unexpected '" + peek().text + "'");
    }
    return e;
  }

private:
  const token& peek() const { return tokens_[pos_]; }
  const token& next() { return tokens_[pos_++]; }
  bool accept(const char* punct) {
    if (peek().kind == token_kind::punct && peek().text == punct) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(const char* punct) {
    if (!accept(punct)) {
      std::string got = peek().kind == token_kind::end ? "end of line" : "'" + peek().text + "'";
      fail(error_kind::syntax, span_of(peek()), std::string("expected '") + punct + "', got " + got);
    }
  }
  source_span span_of(const token& t) const {
    return {line_, t.col, t.col + static_cast<int>(std::max<std::size_t>(t.text.size(), 1)) - 1};
  }
  static expr with_span(expr e, source_span s) {
    auto n = std::make_shared<expr_node>(*e);
    n->span = s;
    return n;
  }
  source_span join(const source_span& a, const source_span& b) const { return {line_, a.col, b.end_col}; }

  expr parse_sum() {
    expr lhs = parse_product();
    for (;;) {
      binary_op op;
      if (accept("+")) {
        op = binary_op::add;
      } else if (accept("-")) {
        op = binary_op::sub;
      } else {
        return lhs;
      }
      expr rhs = parse_product();
      lhs = with_span(make_binary(op, lhs, rhs), join(lhs->span, rhs->span));
    }
  }

  expr parse_product() {
    expr lhs = parse_unary();
    for (;;) {
      binary_op op;
      if (accept("*")) {
        op = binary_op::mul;
      } else if (accept("/")) {
        op = binary_op::div;
      } else {
        return lhs;
      }
      expr rhs = parse_unary();
      lhs = with_span(make_binary(op, lhs, rhs), join(lhs->span, rhs->span));
    }
  }

  expr parse_unary() {
    if (peek().kind == token_kind::punct && peek().text == "-") {
      source_span start = span_of(next());
      expr operand = parse_unary();
      if (operand->kind == expr_kind::literal) {
        return with_span(make_literal(-operand->value), join(start, operand->span));
      }
      return with_span(make_binary(binary_op::sub, make_literal(0.0), operand), join(start, operand->span));
    }
    return parse_primary();
  }

  expr parse_primary() {
    const token& t = peek();
    if (t.kind == token_kind::number) {
      next();
      auto lit = with_span(make_literal(parse_number(t.text)), span_of(t));
      return lit;
    }
    if (accept("(")) {
      expr e = parse_sum();
      expect(")");
      return e;
    }
    if (t.kind != token_kind::ident) {
      std::string got = t.kind == token_kind::end ? "end of line" : "'" + t.text + "'";
      fail(error_kind::syntax, span_of(t), "expected an expression, got " + got);
    }
    next();
    source_span name_span = span_of(t);
    if (!(peek().kind == token_kind::punct && peek().text == "(")) {
      if (std::find(vars_.begin(), vars_.end(), t.text) != vars_.end()) return with_span(make_var(t.text), name_span);
      if (params_.count(t.text)) return with_span(make_param(t.text), name_span);
      fail(error_kind::unknown_identifier, name_span, "unknown identifier '" + t.text + "'");
    }
    expect("(");
    std::vector<expr> args;
    if (!accept(")")) {
      do {
        args.push_back(parse_sum());
      } while (accept(","));
      const token& close = peek();
      expect(")");
      name_span.end_col = close.col;
    }
    if (t.text == "exp" || t.text == "sqrt") {
      if (args.size() != 1) {
        fail(error_kind::arity_mismatch, name_span, t.text + " takes 1 argument, got " + std::to_string(args.size()));
      }
      return with_span(make_call(t.text == "exp" ? intrinsic::exp : intrinsic::sqrt, args[0]), name_span);
    }
    auto target = dims_by_name_.find(t.text);
    if (target == dims_by_name_.end()) {
      fail(error_kind::unknown_identifier, span_of(t), "unknown func '" + t.text + "'");
    }
    const std::vector<std::string>& dims = target->second;
    if (args.size() != dims.size()) {
      fail(error_kind::arity_mismatch, name_span,
           "'" + t.text + "' has " + std::to_string(dims.size()) + " dimension(s), accessed with " +
               std::to_string(args.size()));
    }
    std::vector<index_term> index;
    for (std::size_t i = 0; i < args.size(); ++i) index.push_back(to_index(args[i], dims[i], t.text));
    return with_span(make_access(t.text, std::move(index)), name_span);
  }

  std::optional<std::int64_t> integer_value(const expr& e) const {
    if (e->kind != expr_kind::literal) return std::nullopt;
    double v = e->value;
    if (std::floor(v) != v || std::fabs(v) > 1e15) return std::nullopt;
    return static_cast<std::int64_t>(v);
  }

  index_term to_index(const expr& arg, const std::string& dim, const std::string& target) const {
    auto bad = [&]() {
      fail(error_kind::non_affine_access, arg->span,
           "access argument of '" + target + "' for dimension " + dim + " must be '" + dim + " + <integer>' or an integer");
    };
    if (auto v = integer_value(arg)) return {false, *v};
    auto is_dim_var = [&](const expr& e) { return e->kind == expr_kind::var && e->name == dim; };
    if (is_dim_var(arg)) return {true, 0};
    if (arg->kind == expr_kind::binary && (arg->op == binary_op::add || arg->op == binary_op::sub)) {
      const expr& a = arg->args[0];
      const expr& b = arg->args[1];
      if (is_dim_var(a)) {
        if (auto v = integer_value(b)) return {true, arg->op == binary_op::add ? *v : -*v};
      }
      if (arg->op == binary_op::add && is_dim_var(b)) {
        if (auto v = integer_value(a)) return {true, *v};
      }
    }
    bad();
    return {};
  }

  const std::vector<token>& tokens_;
  std::size_t pos_;
  int line_;
  const std::vector<std::string>& vars_;
  const std::map<std::string, std::vector<std::string>>& dims_by_name_;
  const std::set<std::string>& params_;
};

std::vector<std::string> parse_var_list(const std::vector<token>& tokens, std::size_t& pos, int line) {
  std::vector<std::string> vars;
  auto span = [&](const token& t) { return source_span{line, t.col, t.col}; };
  if (!(tokens[pos].kind == token_kind::punct && tokens[pos].text == "(")) {
    fail(error_kind::syntax, span(tokens[pos]), "expected '('");
  }
  ++pos;
  for (;;) {
    const token& t = tokens[pos];
    if (t.kind != token_kind::ident) fail(error_kind::syntax, span(t), "expected a dimension name");
    if (dim_slot(t.text) < 0) fail(error_kind::syntax, span(t), "dimension must be one of x, y, c; got '" + t.text + "'");
    if (std::find(vars.begin(), vars.end(), t.text) != vars.end()) {
      fail(error_kind::syntax, span(t), "duplicate dimension '" + t.text + "'");
    }
    vars.push_back(t.text);
    ++pos;
    if (tokens[pos].kind == token_kind::punct && tokens[pos].text == ",") {
      ++pos;
      continue;
    }
    if (tokens[pos].kind == token_kind::punct && tokens[pos].text == ")") {
      ++pos;
      break;
    }
    fail(error_kind::syntax, span(tokens[pos]), "expected ',' or ')'");
  }
  if (vars.size() > max_dims) fail(error_kind::syntax, span(tokens[pos - 1]), "at most 3 dimensions are supported");
  return vars;
}

extent parse_extent_text(std::string_view text, int line, int col) {
  extent e;
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }), s.end());
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    if (!is_integer_literal(part)) fail(error_kind::syntax, {line, col, col}, "malformed extent '" + std::string(text) + "'");
    std::int64_t v = std::stoll(part);
    if (v < 1) fail(error_kind::syntax, {line, col, col}, "extent sizes must be >= 1");
    e.sizes.push_back(v);
  }
  if (e.sizes.empty() || e.sizes.size() > max_dims) {
    fail(error_kind::syntax, {line, col, col}, "extent must have 1 to 3 sizes");
  }
  return e;
}

void collect_accesses(const expr& e, std::vector<const expr_node*>& out) {
  if (e->kind == expr_kind::access) out.push_back(e.get());
  for (const expr& a : e->args) collect_accesses(a, out);
}

}  // namespace

pipeline parse_pipeline(std::string_view text) {
  pipeline p;
  std::vector<declaration> decls;
  std::set<std::string> params;
  std::map<std::string, std::vector<std::string>> dims_by_name;
  std::map<std::string, source_span> decl_span;
  bool have_name = false;
  bool have_output = false;
  source_span output_span;

  auto declare = [&](const std::string& name, source_span at) {
    if (decl_span.count(name) || params.count(name)) fail(error_kind::invalid_pipeline, at, "'" + name + "' is declared twice");
    if (name == "exp" || name == "sqrt" || name == "clamp_edge" || dim_slot(name) >= 0) {
      fail(error_kind::invalid_pipeline, at, "'" + name + "' is a reserved name");
    }
    decl_span[name] = at;
  };

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<token> tokens = tokenize(line, line_no);
    if (tokens.front().kind == token_kind::end) {
      if (end == text.size()) break;
      continue;
    }
    const token& head = tokens[0];
    auto span = [&](const token& t) { return source_span{line_no, t.col, t.col + static_cast<int>(t.text.size()) - 1}; };
    auto expect_ident = [&](std::size_t i) -> const token& {
      if (tokens[i].kind != token_kind::ident) fail(error_kind::syntax, span(tokens[i]), "expected an identifier");
      return tokens[i];
    };
    auto expect_punct = [&](std::size_t i, const char* punct) {
      if (!(tokens[i].kind == token_kind::punct && tokens[i].text == punct)) {
        fail(error_kind::syntax, span(tokens[i]), std::string("expected '") + punct + "'");
      }
    };
    if (head.kind != token_kind::ident) fail(error_kind::syntax, span(head), "expected a declaration keyword");

    if (head.text == "pipeline") {
      if (have_name) fail(error_kind::syntax, span(head), "duplicate 'pipeline' line");
      p.name = expect_ident(1).text;
      if (tokens[2].kind != token_kind::end) fail(error_kind::syntax, span(tokens[2]), "unexpected token");
      have_name = true;
    } else if (head.text == "param") {
      const token& name = expect_ident(1);
      expect_punct(2, "=");
      std::size_t i = 3;
      bool negative = false;
      if (tokens[i].kind == token_kind::punct && tokens[i].text == "-") {
        negative = true;
        ++i;
      }
      if (tokens[i].kind != token_kind::number) fail(error_kind::syntax, span(tokens[i]), "expected a number");
      double v = parse_number(tokens[i].text);
      if (tokens[i + 1].kind != token_kind::end) fail(error_kind::syntax, span(tokens[i + 1]), "unexpected token");
      declare(name.text, span(name));
      params.insert(name.text);
      p.params.emplace_back(name.text, negative ? -v : v);
    } else if (head.text == "input") {
      const token& name = expect_ident(1);
      std::size_t pos = 2;
      declaration d;
      d.what = declaration::kind::input;
      d.name = name.text;
      d.dims = parse_var_list(tokens, pos, line_no);
      expect_punct(pos, ":");
      std::size_t colon = line.find(':', static_cast<std::size_t>(tokens[pos].col - 1));
      input_def in{name.text, d.dims, parse_extent_text(line.substr(colon + 1), line_no, tokens[pos].col + 1)};
      if (in.size.sizes.size() != in.dims.size()) {
        fail(error_kind::arity_mismatch, span(name), "input '" + name.text + "' extent rank does not match its dimensions");
      }
      declare(name.text, span(name));
      dims_by_name[name.text] = d.dims;
      p.inputs.push_back(std::move(in));
    } else if (head.text == "func") {
      const token& name = expect_ident(1);
      declaration d;
      d.name = name.text;
      d.line = line_no;
      d.name_col = name.col;
      if (tokens[2].kind == token_kind::punct && tokens[2].text == "=") {
        const token& fn = expect_ident(3);
        if (fn.text != "clamp_edge") fail(error_kind::syntax, span(fn), "expected 'clamp_edge(<input>)' or a dimension list");
        expect_punct(4, "(");
        d.clamped = expect_ident(5).text;
        expect_punct(6, ")");
        if (tokens[7].kind != token_kind::end) fail(error_kind::syntax, span(tokens[7]), "unexpected token");
        d.what = declaration::kind::clamp;
        d.body = tokens;
        d.body_start = 5;
      } else {
        std::size_t pos = 2;
        d.dims = parse_var_list(tokens, pos, line_no);
        expect_punct(pos, "=");
        d.what = declaration::kind::func;
        d.body = tokens;
        d.body_start = pos + 1;
      }
      declare(name.text, span(name));
      decls.push_back(std::move(d));
    } else if (head.text == "output") {
      if (have_output) fail(error_kind::syntax, span(head), "duplicate 'output' line");
      const token& name = expect_ident(1);
      expect_punct(2, ":");
      std::size_t colon = line.find(':', static_cast<std::size_t>(tokens[2].col - 1));
      p.output = name.text;
      p.output_extent = parse_extent_text(line.substr(colon + 1), line_no, tokens[2].col + 1);
      output_span = span(name);
      have_output = true;
    } else {
      fail(error_kind::syntax, span(head), "unknown declaration '" + head.text + "'");
    }
    if (end == text.size()) break;
  }

  if (!have_name) fail(error_kind::syntax, {line_no, 1, 1}, "missing 'pipeline <name>' line");
  if (!have_output) fail(error_kind::syntax, {line_no, 1, 1}, "missing 'output <func> : <extent>' line");

  // Clamp views take the dims of their input.
  for (declaration& d : decls) {
    if (d.what != declaration::kind::clamp) continue;
    const token& t = d.body[d.body_start];
    source_span at{d.line, t.col, t.col + static_cast<int>(t.text.size()) - 1};
    const input_def* in = p.find_input(d.clamped);
    if (!in) {
      if (decl_span.count(d.clamped)) fail(error_kind::invalid_pipeline, at, "clamp_edge must wrap an input, '" + d.clamped + "' is a func");
      fail(error_kind::unknown_identifier, at, "unknown input '" + d.clamped + "'");
    }
    d.dims = in->dims;
  }
  for (const declaration& d : decls) dims_by_name[d.name] = d.dims;

  for (const declaration& d : decls) {
    func_def f;
    f.name = d.name;
    f.dims = d.dims;
    if (d.what == declaration::kind::clamp) {
      f.kind = func_kind::clamp_edge;
      f.clamped_input = d.clamped;
    } else {
      f.kind = func_kind::computed;
      expr_parser parser(d.body, d.body_start, d.line, d.dims, dims_by_name, params);
      f.body = parser.parse_all();
    }
    p.funcs.push_back(std::move(f));
  }

  const func_def* out = p.find_func(p.output);
  if (!out) {
    if (p.find_input(p.output)) fail(error_kind::invalid_pipeline, output_span, "output must be a func, '" + p.output + "' is an input");
    fail(error_kind::unknown_identifier, output_span, "unknown output func '" + p.output + "'");
  }
  if (out->kind != func_kind::computed) fail(error_kind::invalid_pipeline, output_span, "output must be a computed func");
  if (p.output_extent.sizes.size() != out->dims.size()) {
    fail(error_kind::arity_mismatch, output_span, "output extent rank does not match the dimensions of '" + p.output + "'");
  }

  // Cycle detection (DFS colouring) over func -> producer edges.
  std::map<std::string, int> colour;
  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    colour[name] = 1;
    stack.push_back(name);
    for (const std::string& prod : direct_producers(p, name)) {
      if (!p.find_func(prod)) continue;
      if (colour[prod] == 1) {
        std::string cycle;
        auto it = std::find(stack.begin(), stack.end(), prod);
        for (; it != stack.end(); ++it) cycle += *it + " -> ";
        cycle += prod;
        fail(error_kind::cyclic_dependency, decl_span[name], "cyclic dependency: " + cycle);
      }
      if (colour[prod] == 0) visit(prod);
    }
    stack.pop_back();
    colour[name] = 2;
  };
  for (const func_def& f : p.funcs) {
    if (colour[f.name] == 0) visit(f.name);
  }

  // Every func must contribute to the output.
  std::set<std::string> reachable;
  std::vector<std::string> work{p.output};
  while (!work.empty()) {
    std::string n = work.back();
    work.pop_back();
    if (!reachable.insert(n).second) continue;
    if (p.find_func(n)) {
      for (const std::string& prod : direct_producers(p, n)) work.push_back(prod);
    }
  }
  for (const func_def& f : p.funcs) {
    if (!reachable.count(f.name)) fail(error_kind::invalid_pipeline, decl_span[f.name], "func '" + f.name + "' does not contribute to the output");
  }
  return p;
}

pipeline load_pipeline_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(error_kind::io, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_pipeline(ss.str());
  } catch (const error& e) {
    throw error(e.kind(), path + ":" + e.what());
  }
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  // Keep literals recognisable as floats when printed.
  return s;
}

int precedence(binary_op op) { return op == binary_op::add || op == binary_op::sub ? 1 : 2; }

const char* op_text(binary_op op) {
  switch (op) {
  case binary_op::add: return "+";
  case binary_op::sub: return "-";
  case binary_op::mul: return "*";
  case binary_op::div: return "/";
  }
  return "?";
}

void print_to(std::ostream& os, const expr& e, const pipeline* p);

void print_operand(std::ostream& os, const expr& child, binary_op parent, bool right, const pipeline* p) {
  bool parens = false;
  if (child->kind == expr_kind::binary) {
    int cp = precedence(child->op);
    int pp = precedence(parent);
    parens = cp < pp || (right && cp == pp);
  } else if (child->kind == expr_kind::literal && child->value < 0 && !right) {
    parens = false;
  }
  if (parens) os << "(";
  print_to(os, child, p);
  if (parens) os << ")";
}

void print_to(std::ostream& os, const expr& e, const pipeline* p) {
  switch (e->kind) {
  case expr_kind::literal: os << format_double(e->value); break;
  case expr_kind::param:
  case expr_kind::var: os << e->name; break;
  case expr_kind::access: {
    os << e->name << "(";
    const std::vector<std::string>* dims = p ? &p->dims_of(e->name) : nullptr;
    for (std::size_t i = 0; i < e->index.size(); ++i) {
      if (i) os << ", ";
      const index_term& t = e->index[i];
      if (!t.relative) {
        os << t.offset;
      } else {
        os << (dims ? (*dims)[i] : std::string("?"));
        if (t.offset > 0) os << "+" << t.offset;
        if (t.offset < 0) os << "-" << -t.offset;
      }
    }
    os << ")";
    break;
  }
  case expr_kind::binary:
    print_operand(os, e->args[0], e->op, false, p);
    os << " " << op_text(e->op) << " ";
    print_operand(os, e->args[1], e->op, true, p);
    break;
  case expr_kind::call:
    os << (e->fn == intrinsic::exp ? "exp(" : "sqrt(");
    print_to(os, e->args[0], p);
    os << ")";
    break;
  }
}

std::string join_dims(const std::vector<std::string>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += dims[i];
  }
  return s;
}

std::string print_expr_in(const expr& e, const pipeline* p) {
  std::ostringstream os;
  print_to(os, e, p);
  return os.str();
}

}  // namespace

std::string print_expr(const expr& e) { return print_expr_in(e, nullptr); }
std::string print_expr(const pipeline& p, const expr& e) { return print_expr_in(e, &p); }

std::string print_pipeline(const pipeline& p) {
  std::ostringstream os;
  os << "pipeline " << p.name << "\n";
  for (const auto& [name, value] : p.params) os << "param " << name << " = " << format_double(value) << "\n";
  for (const input_def& in : p.inputs) {
    os << "input " << in.name << "(" << join_dims(in.dims) << ") : " << to_string(in.size) << "\n";
  }
  for (const func_def& f : p.funcs) {
    if (f.kind == func_kind::clamp_edge) {
      os << "func " << f.name << " = clamp_edge(" << f.clamped_input << ")\n";
    } else {
      os << "func " << f.name << "(" << join_dims(f.dims) << ") = " << print_expr_in(f.body, &p) << "\n";
    }
  }
  os << "output " << p.output << " : " << to_string(p.output_extent) << "\n";
  return os.str();
}

pipeline resize_pipeline(const pipeline& p, std::int64_t width, std::int64_t height) {
  pipeline r = p;
  auto resize = [&](const std::vector<std::string>& dims, extent& e) {
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i] == "x") e.sizes[i] = width;
      if (dims[i] == "y") e.sizes[i] = height;
    }
  };
  for (input_def& in : r.inputs) resize(in.dims, in.size);
  resize(r.find_func(r.output)->dims, r.output_extent);
  return r;
}

std::vector<std::string> direct_producers(const pipeline& p, std::string_view f) {
  const func_def* def = p.find_func(f);
  if (!def) return {};
  if (def->kind == func_kind::clamp_edge) return {def->clamped_input};
  std::vector<const expr_node*> accesses;
  collect_accesses(def->body, accesses);
  std::vector<std::string> result;
  for (const expr_node* a : accesses) {
    if (std::find(result.begin(), result.end(), a->name) == result.end()) result.push_back(a->name);
  }
  return result;
}

std::vector<std::string> direct_consumers(const pipeline& p, std::string_view f) {
  std::vector<std::string> result;
  for (const func_def& c : p.funcs) {
    std::vector<std::string> prods = direct_producers(p, c.name);
    if (std::find(prods.begin(), prods.end(), f) != prods.end()) result.push_back(c.name);
  }
  return result;
}

std::vector<std::string> inverse_topological_order(const pipeline& p) {
  std::map<std::string, int> pending;
  for (const func_def& f : p.funcs) {
    int n = 0;
    for (const std::string& prod : direct_producers(p, f.name)) {
      if (p.find_func(prod)) ++n;
    }
    pending[f.name] = n;
  }
  std::vector<std::string> forward;
  std::set<std::string> done;
  while (forward.size() < p.funcs.size()) {
    // Earliest-declared ready func.
    for (const func_def& f : p.funcs) {
      if (done.count(f.name) || pending[f.name] != 0) continue;
      forward.push_back(f.name);
      done.insert(f.name);
      for (const std::string& c : direct_consumers(p, f.name)) --pending[c];
      break;
    }
  }
  return {forward.rbegin(), forward.rend()};
}

interval dim_footprint::offsets() const { return relative ? *relative : interval{0, 0}; }

footprint compute_footprint(const pipeline& p, std::string_view consumer, std::string_view producer) {
  const func_def* c = p.find_func(consumer);
  if (!c) throw error(error_kind::unknown_identifier, "unknown func '" + std::string(consumer) + "'");
  const std::vector<std::string>& dims = p.dims_of(producer);
  footprint fp;
  for (const std::string& d : dims) fp.push_back({d, std::nullopt, std::nullopt});
  auto add = [&](const std::vector<index_term>& index) {
    for (std::size_t i = 0; i < index.size(); ++i) {
      std::optional<interval>& slot = index[i].relative ? fp[i].relative : fp[i].absolute;
      interval v{index[i].offset, index[i].offset};
      slot = slot ? hull(*slot, v) : v;
    }
  };
  bool found = false;
  if (c->kind == func_kind::clamp_edge) {
    if (c->clamped_input == producer) {
      add(std::vector<index_term>(dims.size(), index_term{true, 0}));
      found = true;
    }
  } else {
    std::vector<const expr_node*> accesses;
    collect_accesses(c->body, accesses);
    for (const expr_node* a : accesses) {
      if (a->name != producer) continue;
      add(a->index);
      found = true;
    }
  }
  if (!found) {
    throw error(error_kind::no_dependency, "'" + std::string(consumer) + "' does not access '" + std::string(producer) + "' directly");
  }
  return fp;
}

namespace {

std::int64_t count_ops(const expr& e, int intrinsic_weight) {
  std::int64_t n = 0;
  if (e->kind == expr_kind::binary) n += 1;
  if (e->kind == expr_kind::call) n += intrinsic_weight;
  for (const expr& a : e->args) n += count_ops(a, intrinsic_weight);
  return n;
}

}  // namespace

std::int64_t ops_per_point(const func_def& f, int intrinsic_weight) {
  if (f.kind != func_kind::computed) return 0;
  return count_ops(f.body, intrinsic_weight);
}

graph_view dependency_graph_view(const pipeline& p, const std::optional<std::string>& highlighted) {
  if (highlighted && !p.find_func(*highlighted)) {
    throw error(error_kind::unknown_identifier, "cannot highlight unknown func '" + *highlighted + "'");
  }
  graph_view g;
  for (const input_def& in : p.inputs) g.inputs.push_back(in.name);
  for (const func_def& f : p.funcs) {
    g.nodes.push_back({f.name, f.kind, highlighted && *highlighted == f.name});
    for (const std::string& prod : direct_producers(p, f.name)) g.edges.emplace_back(prod, f.name);
  }
  return g;
}

namespace {

struct expander {
  const pipeline& p;
  const std::function<bool(std::string_view)>& materialized;
  int weight;
  expansion out;

  // `vars[slot]` is the index term (relative to the root func) bound to the
  // current func's loop variable with that slot.
  void walk(const expr& e, const std::array<index_term, max_dims>& vars) {
    switch (e->kind) {
    case expr_kind::literal:
    case expr_kind::param:
    case expr_kind::var: return;
    case expr_kind::binary:
      out.ops += 1;
      walk(e->args[0], vars);
      walk(e->args[1], vars);
      return;
    case expr_kind::call:
      out.ops += weight;
      walk(e->args[0], vars);
      return;
    case expr_kind::access: break;
    }
    const std::vector<std::string>& dims = p.dims_of(e->name);
    std::vector<index_term> index(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const index_term& t = e->index[i];
      if (t.relative) {
        const index_term& base = vars[dim_slot(dims[i])];
        index[i] = {base.relative, base.offset + t.offset};
      } else {
        index[i] = t;
      }
    }
    access(e->name, std::move(index));
  }

  void access(const std::string& name, std::vector<index_term> index) {
    const func_def* f = p.find_func(name);
    if (!f || materialized(name)) {
      out.loads.push_back({name, std::move(index), false});
      return;
    }
    out.inline_calls[name] += 1;
    if (f->kind == func_kind::clamp_edge) {
      out.loads.push_back({f->clamped_input, std::move(index), true});
      return;
    }
    std::array<index_term, max_dims> vars{};
    for (std::size_t i = 0; i < f->dims.size(); ++i) vars[dim_slot(f->dims[i])] = index[i];
    walk(f->body, vars);
  }
};

}  // namespace

expansion expand(const pipeline& p, std::string_view func, const std::function<bool(std::string_view)>& materialized,
                 int intrinsic_weight) {
  const func_def* f = p.find_func(func);
  if (!f) throw error(error_kind::unknown_identifier, "unknown func '" + std::string(func) + "'");
  expander x{p, materialized, intrinsic_weight, {}};
  if (f->kind == func_kind::clamp_edge) {
    x.out.loads.push_back({f->clamped_input, std::vector<index_term>(f->dims.size(), index_term{true, 0}), true});
    return x.out;
  }
  std::array<index_term, max_dims> vars{};
  for (const std::string& d : f->dims) vars[dim_slot(d)] = {true, 0};
  x.walk(f->body, vars);
  return x.out;
}

}  // namespace tileguide
