#pragma once

#include <stdexcept>
#include <string>

namespace dacl {

// Invalid policy or scenario parameters detected before or during a run.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not enough history accumulated to answer the query yet.
class NotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A node holds traffic for a commodity but has no outgoing route for it.
class RoutingHole : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dacl
