#include "ddosnet/log.hpp"

#include <iostream>
#include <mutex>

namespace ddosnet {

namespace {

std::mutex g_mutex;
LogLevel g_threshold = LogLevel::warning;

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warning: return "warning";
    case LogLevel::error: return "error";
  }
  return "?";
}

LogSink& sink() {
  static LogSink s = [](LogLevel level, std::string_view message) {
    if (level < g_threshold) return;
    std::cerr << "[" << level_name(level) << "] " << message << '\n';
  };
  return s;
}

}  // namespace

LogSink set_log_sink(LogSink s) {
  std::lock_guard lock(g_mutex);
  LogSink previous = std::move(sink());
  sink() = std::move(s);
  return previous;
}

void set_log_threshold(LogLevel level) {
  std::lock_guard lock(g_mutex);
  g_threshold = level;
}

void log(LogLevel level, std::string_view message) {
  std::lock_guard lock(g_mutex);
  if (sink()) sink()(level, message);
}

}  // namespace ddosnet
