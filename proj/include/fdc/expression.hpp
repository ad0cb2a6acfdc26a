#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/predictor.hpp"

namespace fdc {

/// Arithmetic expression over the features of a schema.
///
/// Grammar, loosest binding first:
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?          right-associative
///   primary := number | '(' expr ')' | name '(' expr (',' expr)* ')'
///            | feature '==' "level" | feature
///
/// so "-x^2" is -(x^2) and "2^3^2" is 2^9. Feature names are identifiers
/// ([A-Za-z_][A-Za-z0-9_.]*) or any text in backticks. Functions: abs, exp,
/// log, sqrt, sin, cos (one argument), min, max (two). A categorical feature
/// may only appear in an equality test, which evaluates to 1 or 0.
class ExpressionModel final : public Predictor {
 public:
  enum class Op { Literal, Feature, LevelEq, Neg, Add, Sub, Mul, Div, Pow, Abs, Exp, Log, Sqrt, Sin, Cos, Min, Max };

  struct Node {
    Op op = Op::Literal;
    double value = 0.0;       // Literal; level index for LevelEq
    std::size_t feature = 0;  // Feature, LevelEq
    std::size_t lhs = 0;
    std::size_t rhs = 0;
  };

  static ExpressionModel parse(std::string_view source, Schema schema) {
    ExpressionModel model;
    model.schema_ = std::move(schema);
    model.source_ = std::string(source);
    Parser parser{source, model.schema_, model.nodes_};
    parser.parse();
    return model;
  }

  const Schema& schema() const override { return schema_; }
  const std::string& source() const noexcept { return source_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }

  /// Evaluates one row given in this model's schema. Domain violations
  /// (division by zero, log or sqrt of a negative, overflow) throw
  /// PredictErrc::Evaluation instead of producing NaN or infinity.
  double evaluate(std::span<const double> row) const {
    std::vector<double> scratch(nodes_.size());
    return evaluate(row, scratch);
  }

 protected:
  std::vector<double> do_predict(const RowBatch& rows) const override {
    std::vector<double> out(rows.size());
    std::vector<double> scratch(nodes_.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = evaluate(rows.row(i), scratch);
    return out;
  }

 private:
  ExpressionModel() = default;

  // Children always precede their parent, so one forward pass evaluates the tree.
  double evaluate(std::span<const double> row, std::vector<double>& v) const {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const Node& n = nodes_[k];
      const double a = v[n.lhs];
      const double b = v[n.rhs];
      double r = 0.0;
      switch (n.op) {
        case Op::Literal: r = n.value; break;
        case Op::Feature: r = row[n.feature]; break;
        case Op::LevelEq: r = row[n.feature] == n.value ? 1.0 : 0.0; break;
        case Op::Neg: r = -a; break;
        case Op::Add: r = a + b; break;
        case Op::Sub: r = a - b; break;
        case Op::Mul: r = a * b; break;
        case Op::Div:
          if (b == 0.0) fail("division by zero");
          r = a / b;
          break;
        case Op::Pow: r = std::pow(a, b); break;
        case Op::Abs: r = std::fabs(a); break;
        case Op::Exp: r = std::exp(a); break;
        case Op::Log:
          if (a <= 0.0) fail("log of a non-positive value");
          r = std::log(a);
          break;
        case Op::Sqrt:
          if (a < 0.0) fail("sqrt of a negative value");
          r = std::sqrt(a);
          break;
        case Op::Sin: r = std::sin(a); break;
        case Op::Cos: r = std::cos(a); break;
        case Op::Min: r = std::fmin(a, b); break;
        case Op::Max: r = std::fmax(a, b); break;
      }
      if (!std::isfinite(r)) fail("non-finite intermediate result");
      v[k] = r;
    }
    return v.back();
  }

  [[noreturn]] static void fail(const char* what) { throw PredictError(PredictErrc::Evaluation, what); }

  struct Parser {
    std::string_view src;
    const Schema& schema;
    std::vector<Node>& nodes;
    std::size_t pos = 0;

    void parse() {
      expr();
      skip_ws();
      if (pos != src.size()) syntax("unexpected trailing input");
      if (nodes.empty()) syntax("empty expression");
    }

    [[noreturn]] void syntax(const std::string& what) const { throw ParseError(ParseErrc::Syntax, pos, what); }

    void skip_ws() {
      while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t' || src[pos] == '\n' || src[pos] == '\r')) ++pos;
    }

    bool accept(char c) {
      skip_ws();
      if (pos < src.size() && src[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    void expect(char c) {
      if (!accept(c)) syntax(std::string("expected '") + c + "'");
    }

    std::size_t push(Node n) {
      nodes.push_back(n);
      return nodes.size() - 1;
    }

    std::size_t binary(Op op, std::size_t lhs, std::size_t rhs) { return push({op, 0.0, 0, lhs, rhs}); }

    std::size_t expr() {
      std::size_t lhs = term();
      for (;;) {
        if (accept('+')) lhs = binary(Op::Add, lhs, term());
        else if (accept('-')) lhs = binary(Op::Sub, lhs, term());
        else return lhs;
      }
    }

    std::size_t term() {
      std::size_t lhs = unary();
      for (;;) {
        if (accept('*')) lhs = binary(Op::Mul, lhs, unary());
        else if (accept('/')) lhs = binary(Op::Div, lhs, unary());
        else return lhs;
      }
    }

    std::size_t unary() {
      if (accept('-')) {
        const std::size_t operand = unary();
        return push({Op::Neg, 0.0, 0, operand, operand});
      }
      return power();
    }

    std::size_t power() {
      const std::size_t base = primary();
      if (accept('^')) return binary(Op::Pow, base, unary());
      return base;
    }

    std::size_t primary() {
      skip_ws();
      if (pos >= src.size()) syntax("expected operand");
      const char c = src[pos];
      if (c == '(') {
        ++pos;
        const std::size_t inner = expr();
        expect(')');
        return inner;
      }
      if (is_digit(c) || (c == '.' && pos + 1 < src.size() && is_digit(src[pos + 1]))) return number();
      if (c == '`' || is_ident_start(c)) return name();
      syntax(std::string("unexpected character '") + c + "'");
    }

    std::size_t number() {
      const std::size_t start = pos;
      while (pos < src.size() && is_digit(src[pos])) ++pos;
      if (pos < src.size() && src[pos] == '.') {
        ++pos;
        while (pos < src.size() && is_digit(src[pos])) ++pos;
      }
      if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
        std::size_t look = pos + 1;
        if (look < src.size() && (src[look] == '+' || src[look] == '-')) ++look;
        if (look < src.size() && is_digit(src[look])) {
          pos = look;
          while (pos < src.size() && is_digit(src[pos])) ++pos;
        }
      }
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(src.data() + start, src.data() + pos, value);
      if (ec != std::errc{} || ptr != src.data() + pos || !std::isfinite(value)) {
        pos = start;
        syntax("invalid number");
      }
      return push({Op::Literal, value, 0, 0, 0});
    }

    std::size_t name() {
      const std::size_t start = pos;
      std::string ident;
      bool quoted = false;
      if (src[pos] == '`') {
        quoted = true;
        const std::size_t close = src.find('`', pos + 1);
        if (close == std::string_view::npos) syntax("unterminated backtick name");
        ident = std::string(src.substr(pos + 1, close - pos - 1));
        pos = close + 1;
      } else {
        while (pos < src.size() && is_ident_char(src[pos])) ++pos;
        ident = std::string(src.substr(start, pos - start));
      }

      skip_ws();
      if (!quoted && pos < src.size() && src[pos] == '(') {
        ++pos;
        return call(ident, start);
      }

      const auto feature = schema.index_of(ident);
      if (!feature) throw ParseError(ParseErrc::UnknownFeature, start, "'" + ident + "'");
      const FeatureKind& kind = schema[*feature].kind;

      if (src.substr(pos, 2) == "==") {
        const std::size_t eq_pos = pos;
        pos += 2;
        if (!kind.is_categorical()) {
          throw ParseError(ParseErrc::NotCategorical, eq_pos, "'" + ident + "' is numeric");
        }
        skip_ws();
        const std::size_t level_pos = pos;
        const std::string level = string_literal();
        const auto idx = kind.level_index(level);
        if (!idx) throw ParseError(ParseErrc::UnknownLevel, level_pos, "'" + level + "' is not a level of '" + ident + "'");
        return push({Op::LevelEq, static_cast<double>(*idx), *feature, 0, 0});
      }
      if (kind.is_categorical()) {
        throw ParseError(ParseErrc::CategoricalArithmetic, start,
                         "'" + ident + "' is categorical; compare it with == \"level\"");
      }
      return push({Op::Feature, 0.0, *feature, 0, 0});
    }

    std::string string_literal() {
      if (pos >= src.size() || src[pos] != '"') syntax("expected string literal");
      ++pos;
      std::string out;
      while (pos < src.size() && src[pos] != '"') {
        if (src[pos] == '\\' && pos + 1 < src.size()) ++pos;
        out.push_back(src[pos++]);
      }
      if (pos >= src.size()) syntax("unterminated string literal");
      ++pos;
      return out;
    }

    std::size_t call(const std::string& fn, std::size_t fn_pos) {
      static constexpr std::pair<std::string_view, Op> unary_fns[] = {
          {"abs", Op::Abs}, {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"sin", Op::Sin}, {"cos", Op::Cos}};
      for (const auto& [fname, op] : unary_fns) {
        if (fn == fname) {
          const std::size_t arg = expr();
          expect(')');
          return push({op, 0.0, 0, arg, arg});
        }
      }
      if (fn == "min" || fn == "max") {
        const std::size_t a = expr();
        expect(',');
        const std::size_t b = expr();
        expect(')');
        return binary(fn == "min" ? Op::Min : Op::Max, a, b);
      }
      throw ParseError(ParseErrc::UnknownFunction, fn_pos, "'" + fn + "'");
    }

    static bool is_digit(char c) { return c >= '0' && c <= '9'; }
    static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c) || c == '.'; }
  };

  Schema schema_;
  std::string source_;
  std::vector<Node> nodes_;
};

inline ExpressionModel parse_expression(std::string_view source, const Schema& schema) {
  return ExpressionModel::parse(source, schema);
}

}  // namespace fdc
