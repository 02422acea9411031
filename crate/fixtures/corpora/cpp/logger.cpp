#include <chrono>
#include <fstream>
#include <mutex>
#include <string>
#include "logger.hpp"

namespace util {

// Thread-safe append-only file logger.
Logger::Logger(const std::string& path) : out_(path, std::ios::app) {}

Logger::~Logger() { out_.flush(); }

void Logger::write(Level level, const std::string& message) {
  std::lock_guard<std::mutex> guard(mu_);
  auto now = std::chrono::system_clock::now().time_since_epoch();
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  out_ << ms << " " << label(level) << " " << message << "\n";
}

const char* Logger::label(Level level) {
  switch (level) {
    case Level::Debug:
      return "DEBUG";
    case Level::Info:
      return "INFO";
    case Level::Error:
      return "ERROR";
  }
  return "?"; /* unreachable */
}

}  // namespace util
