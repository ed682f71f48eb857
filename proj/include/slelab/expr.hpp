#pragma once

// Restricted arithmetic over one variable x:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'x' | 'e' | 'log' '(' expr ')' | 'pow' '(' expr ',' expr ')' | '(' expr ')'

#include <memory>
#include <string>
#include <string_view>

namespace sle {

class Expr {
 public:
  /// Throws ParseError with the offending offset.
  static Expr parse(std::string_view text);

  double operator()(double x) const;
  const std::string& text() const noexcept { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace sle
