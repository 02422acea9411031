#pragma once

#include <string>
#include <vector>

namespace calc {

enum class TokenKind { Number, Op };

/**
 * One lexical token.
 */
struct Token {
  TokenKind kind;
  std::string text;
};

class Tokenizer {
 public:
  explicit Tokenizer(std::string input);
  std::vector<Token> run();

 private:
  Token number();

  std::string input_;
  std::size_t pos_;
};

}  // namespace calc
