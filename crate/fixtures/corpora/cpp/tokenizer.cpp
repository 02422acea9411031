#include "tokenizer.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

// Splits an arithmetic expression into tokens.
// Numbers may contain a single decimal point.

namespace calc {

static bool is_operator(char c) {
  return c == '+' || c == '-' || c == '*' || c == '/' || c == '(' || c == ')';
}

Tokenizer::Tokenizer(std::string input) : input_(std::move(input)), pos_(0) {}

std::vector<Token> Tokenizer::run() {
  std::vector<Token> out;
  while (pos_ < input_.size()) {
    char c = input_[pos_];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos_;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      out.push_back(number());
    } else if (is_operator(c)) {
      out.push_back(Token{TokenKind::Op, std::string(1, c)});
      ++pos_;
    } else {
      std::ostringstream msg;
      msg << "unexpected character '" << c << "' at " << pos_;  // not a comment: // inside a string
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

Token Tokenizer::number() {
  std::size_t start = pos_;
  bool seen_dot = false;
  while (pos_ < input_.size()) {
    char c = input_[pos_];
    if (c == '.') {
      if (seen_dot) {
        break;
      }
      seen_dot = true;
    } else if (!std::isdigit(static_cast<unsigned char>(c))) {
      break;
    }
    ++pos_;
  }
  return Token{TokenKind::Number, input_.substr(start, pos_ - start)};
}

}  // namespace calc
