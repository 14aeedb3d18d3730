#pragma once

#include <functional>
#include <string>
#include <vector>

namespace condbm {

// Compiled drift expression over the grammar
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := ('+'|'-')* primary
//   primary:= number | 'x' | ('exp'|'tanh') '(' expr ')' | '(' expr ')'
// — enough for every drift used here (linear, affine, saturating) without a
// general interpreter. Parse errors throw std::invalid_argument with a
// caret position.
class DriftExpr {
public:
    static DriftExpr parse(const std::string& text);

    double operator()(double x) const;
    std::function<double(double)> as_function() const;
    const std::string& text() const { return text_; }

private:
    enum class Op : int { push_const, push_x, add, sub, mul, div, neg, exp, tanh };
    struct Instr {
        Op op;
        double value = 0.0;
    };
    std::vector<Instr> code_; // RPN program
    std::string text_;
    friend struct DriftExprParser;
};

} // namespace condbm
