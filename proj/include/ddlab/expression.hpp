#pragma once

// Tiny arithmetic expression language for user-supplied drift and diffusion
// coefficients: numbers, the variable x, + - * / and parentheses, ^ for
// powers, and the functions exp, log, sqrt, pow(a, b). Parsed once into a
// stack program so repeated evaluation (every Euler step) stays cheap.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ddlab {

class Expression {
  public:
    static Expression parse(const std::string& src) {
        Parser p{src, 0};
        Expression e;
        p.expr(e);
        p.skip_ws();
        if (p.pos != src.size())
            throw DomainViolation("expression: unexpected trailing input at position " +
                                  std::to_string(p.pos) + " in '" + src + "'");
        if (e.ops_.empty()) throw DomainViolation("expression: empty input");
        return e;
    }

    double operator()(double x) const {
        double stack[64];
        int top = -1;
        std::size_t ci = 0;
        for (const Op op : ops_) {
            switch (op) {
            case Op::push_const: stack[++top] = consts_[ci++]; break;
            case Op::push_x: stack[++top] = x; break;
            case Op::add: --top; stack[top] += stack[top + 1]; break;
            case Op::sub: --top; stack[top] -= stack[top + 1]; break;
            case Op::mul: --top; stack[top] *= stack[top + 1]; break;
            case Op::div: --top; stack[top] /= stack[top + 1]; break;
            case Op::neg: stack[top] = -stack[top]; break;
            case Op::fexp: stack[top] = std::exp(stack[top]); break;
            case Op::flog: stack[top] = std::log(stack[top]); break;
            case Op::fsqrt: stack[top] = std::sqrt(stack[top]); break;
            case Op::fpow: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
            }
        }
        return stack[0];
    }

    const std::string& source() const { return src_; }

  private:
    enum class Op : std::uint8_t {
        push_const, push_x, add, sub, mul, div, neg, fexp, flog, fsqrt, fpow
    };
    std::vector<Op> ops_;
    std::vector<double> consts_;
    std::string src_;
    int depth_ = 0;  // evaluation stack high-water mark

    struct Parser {
        const std::string& s;
        std::size_t pos;

        void skip_ws() {
            while (pos < s.size() && std::isspace((unsigned char)s[pos])) ++pos;
        }
        bool eat(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        [[noreturn]] void fail(const std::string& what) {
            throw DomainViolation("expression: " + what + " at position " + std::to_string(pos) +
                                  " in '" + s + "'");
        }

        void expr(Expression& e) {
            term(e);
            for (;;) {
                if (eat('+')) {
                    term(e);
                    e.emit(Op::add);
                } else if (eat('-')) {
                    term(e);
                    e.emit(Op::sub);
                } else {
                    return;
                }
            }
        }
        void term(Expression& e) {
            unary(e);
            for (;;) {
                if (eat('*')) {
                    unary(e);
                    e.emit(Op::mul);
                } else if (eat('/')) {
                    unary(e);
                    e.emit(Op::div);
                } else {
                    return;
                }
            }
        }
        void unary(Expression& e) {
            if (eat('-')) {
                unary(e);
                e.emit(Op::neg);
                return;
            }
            (void)eat('+');
            power(e);
        }
        void power(Expression& e) {
            atom(e);
            if (eat('^')) {
                unary(e);  // right associative, unary minus binds to the exponent
                e.emit(Op::fpow);
            }
        }
        void atom(Expression& e) {
            skip_ws();
            if (pos >= s.size()) fail("unexpected end of input");
            const char c = s[pos];
            if (std::isdigit((unsigned char)c) || c == '.') {
                const char* start = s.c_str() + pos;
                char* end = nullptr;
                const double v = std::strtod(start, &end);
                if (end == start) fail("malformed number");
                pos += (std::size_t)(end - start);
                e.emit_const(v);
                return;
            }
            if (std::isalpha((unsigned char)c)) {
                std::size_t len = 0;
                while (pos + len < s.size() && std::isalpha((unsigned char)s[pos + len])) ++len;
                const std::string name = s.substr(pos, len);
                pos += len;
                if (name == "x") {
                    e.emit(Op::push_x);
                    return;
                }
                if (name == "pow") {
                    if (!eat('(')) fail("expected '(' after pow");
                    expr(e);
                    if (!eat(',')) fail("pow needs two arguments");
                    expr(e);
                    if (!eat(')')) fail("expected ')'");
                    e.emit(Op::fpow);
                    return;
                }
                Op op;
                if (name == "exp") op = Op::fexp;
                else if (name == "log") op = Op::flog;
                else if (name == "sqrt") op = Op::fsqrt;
                else fail("unknown identifier '" + name + "'");
                if (!eat('(')) fail("expected '(' after " + name);
                expr(e);
                if (!eat(')')) fail("expected ')'");
                e.emit(op);
                return;
            }
            if (eat('(')) {
                expr(e);
                if (!eat(')')) fail("expected ')'");
                return;
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    };

    void emit(Op op) {
        ops_.push_back(op);
        // track stack depth so the fixed evaluation buffer provably suffices
        if (op == Op::push_const || op == Op::push_x) {
            if (++depth_ > 60) throw DomainViolation("expression: too deeply nested");
        } else if (op == Op::add || op == Op::sub || op == Op::mul || op == Op::div ||
                   op == Op::fpow) {
            --depth_;
        }
    }
    void emit_const(double v) {
        consts_.push_back(v);
        emit(Op::push_const);
    }

    friend struct Parser;

  public:
    // keep the original text for error messages and round-tripping configs
    static Expression parse_named(const std::string& src) {
        Expression e = parse(src);
        e.src_ = src;
        return e;
    }
};

} // namespace ddlab
