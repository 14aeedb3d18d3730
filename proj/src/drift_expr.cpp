#include "condbm/drift_expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace condbm {

struct DriftExprParser {
    const std::string& text;
    std::size_t pos = 0;
    std::vector<DriftExpr::Instr>& code;

    using Op = DriftExpr::Op;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("drift expression: " + what + " at position " +
                                    std::to_string(pos) + " in \"" + text + "\"");
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    void expr() {
        term();
        for (;;) {
            if (eat('+')) {
                term();
                code.push_back({Op::add, 0.0});
            } else if (eat('-')) {
                term();
                code.push_back({Op::sub, 0.0});
            } else {
                return;
            }
        }
    }

    void term() {
        unary();
        for (;;) {
            if (eat('*')) {
                unary();
                code.push_back({Op::mul, 0.0});
            } else if (eat('/')) {
                unary();
                code.push_back({Op::div, 0.0});
            } else {
                return;
            }
        }
    }

    void unary() {
        bool negate = false;
        for (;;) {
            if (eat('-')) negate = !negate;
            else if (eat('+')) continue;
            else break;
        }
        primary();
        if (negate) code.push_back({Op::neg, 0.0});
    }

    bool eat_word(const char* w) {
        skip_ws();
        std::size_t k = 0;
        while (w[k] != '\0' && pos + k < text.size() && text[pos + k] == w[k]) ++k;
        if (w[k] != '\0') return false;
        // must not continue as an identifier (rejects "expanded", "xy", ...)
        if (pos + k < text.size() &&
            (std::isalnum(static_cast<unsigned char>(text[pos + k])) ||
             text[pos + k] == '_'))
            return false;
        pos += k;
        return true;
    }

    void primary() {
        skip_ws();
        if (eat('(')) {
            expr();
            if (!eat(')')) fail("expected ')'");
            return;
        }
        if (eat_word("exp")) {
            if (!eat('(')) fail("expected '(' after exp");
            expr();
            if (!eat(')')) fail("expected ')'");
            code.push_back({Op::exp, 0.0});
            return;
        }
        if (eat_word("tanh")) {
            if (!eat('(')) fail("expected '(' after tanh");
            expr();
            if (!eat(')')) fail("expected ')'");
            code.push_back({Op::tanh, 0.0});
            return;
        }
        if (eat_word("x")) {
            code.push_back({Op::push_x, 0.0});
            return;
        }
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* start = text.c_str() + pos;
            char* end = nullptr;
            const double v = std::strtod(start, &end);
            if (end == start) fail("expected a number");
            pos += static_cast<std::size_t>(end - start);
            code.push_back({Op::push_const, v});
            return;
        }
        fail("expected a number, 'x', 'exp', 'tanh', or '('");
    }
};

DriftExpr DriftExpr::parse(const std::string& text) {
    DriftExpr e;
    e.text_ = text;
    DriftExprParser p{text, 0, e.code_};
    p.expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    if (e.code_.empty()) p.fail("empty expression");
    return e;
}

double DriftExpr::operator()(double x) const {
    double stack[64];
    std::size_t sp = 0;
    for (const auto& ins : code_) {
        switch (ins.op) {
        case Op::push_const: stack[sp++] = ins.value; break;
        case Op::push_x: stack[sp++] = x; break;
        case Op::add: --sp; stack[sp - 1] += stack[sp]; break;
        case Op::sub: --sp; stack[sp - 1] -= stack[sp]; break;
        case Op::mul: --sp; stack[sp - 1] *= stack[sp]; break;
        case Op::div: --sp; stack[sp - 1] /= stack[sp]; break;
        case Op::neg: stack[sp - 1] = -stack[sp - 1]; break;
        case Op::exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
        case Op::tanh: stack[sp - 1] = std::tanh(stack[sp - 1]); break;
        }
        if (sp >= 64) throw std::invalid_argument("drift expression: too deeply nested");
    }
    return stack[0];
}

std::function<double(double)> DriftExpr::as_function() const {
    return [e = *this](double x) { return e(x); };
}

} // namespace condbm
