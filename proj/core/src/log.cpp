#include "fixpose/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace fixpose {
namespace {

std::mutex g_sink_mutex;

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return s;
}

}  // namespace

WarningSink set_warning_sink(WarningSink new_sink) {
  std::lock_guard lock(g_sink_mutex);
  return std::exchange(sink(), std::move(new_sink));
}

void warn(std::string_view message) {
  std::lock_guard lock(g_sink_mutex);
  if (sink()) sink()(message);
}

}  // namespace fixpose
