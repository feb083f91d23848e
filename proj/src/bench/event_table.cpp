#include "semistatic/bench/event_table.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#if defined(__x86_64__)
#include <cpuid.h>
#endif

namespace semistatic::bench {

CpuModel probe_cpu() {
  CpuModel cpu;
#if defined(__x86_64__)
  unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
  if (__get_cpuid(0, &eax, &ebx, &ecx, &edx) != 0) {
    char vendor[13] = {};
    std::copy_n(reinterpret_cast<const char*>(&ebx), 4, vendor);
    std::copy_n(reinterpret_cast<const char*>(&edx), 4, vendor + 4);
    std::copy_n(reinterpret_cast<const char*>(&ecx), 4, vendor + 8);
    cpu.vendor = vendor;
  }
  if (__get_cpuid(1, &eax, &ebx, &ecx, &edx) != 0) {
    const unsigned base_family = (eax >> 8) & 0xf;
    const unsigned base_model = (eax >> 4) & 0xf;
    cpu.family = base_family == 0xf ? base_family + ((eax >> 20) & 0xff) : base_family;
    cpu.model = (base_family == 0x6 || base_family == 0xf) ? (((eax >> 16) & 0xf) << 4) | base_model
                                                           : base_model;
  }
#endif
  return cpu;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw std::runtime_error("event table line " + std::to_string(line) + ": " + what);
}

std::uint64_t parse_number(const std::string& text, std::size_t line) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    fail(line, "bad number '" + text + "'");
  }
  if (used != text.size()) {
    fail(line, "bad number '" + text + "'");
  }
  return v;
}

}  // namespace

EventTable EventTable::parse(std::string_view text) {
  EventTable table;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  MicroarchEvents* current = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string content = trim(std::string_view(raw).substr(0, hash));
    if (content.empty()) {
      continue;
    }
    if (content.front() == '[') {
      if (content.back() != ']' || content.size() < 3) {
        fail(line, "malformed section header");
      }
      MicroarchEvents entry;
      entry.name = trim(content.substr(1, content.size() - 2));
      table.entries_.push_back(std::move(entry));
      current = &table.entries_.back();
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      fail(line, "expected key = value");
    }
    if (current == nullptr) {
      fail(line, "key outside a section");
    }
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key == "family") {
      current->family = static_cast<unsigned>(parse_number(value, line));
    } else if (key == "models") {
      if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
        fail(line, "models must be a [list]");
      }
      std::stringstream items(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
          current->models.push_back(static_cast<unsigned>(parse_number(item, line)));
        }
      }
    } else if (key == "smc_clears") {
      current->smc_clears = parse_number(value, line);
    } else if (key == "baclears") {
      current->baclears = parse_number(value, line);
    } else {
      fail(line, "unknown key '" + key + "'");
    }
  }
  return table;
}

EventTable EventTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open event table " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<MicroarchEvents> EventTable::lookup(unsigned family, unsigned model) const {
  for (const auto& e : entries_) {
    if (e.family == family &&
        std::find(e.models.begin(), e.models.end(), model) != e.models.end()) {
      return e;
    }
  }
  return std::nullopt;
}

std::string default_events_file() {
#ifdef SEMISTATIC_DEFAULT_EVENTS_FILE
  return SEMISTATIC_DEFAULT_EVENTS_FILE;
#else
  return "events.toml";
#endif
}

}  // namespace semistatic::bench
