// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <string>

#include "tlearn/errors.hpp"

namespace tlearn {

enum class Method : std::uint8_t { cl, tl, fedavg, sl, sl_plus, sfl };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::cl: return "cl";
    case Method::tl: return "tl";
    case Method::fedavg: return "fedavg";
    case Method::sl: return "sl";
    case Method::sl_plus: return "sl_plus";
    case Method::sfl: return "sfl";
  }
  return "unknown";
}

inline Method method_from_name(const std::string& name) {
  if (name == "cl") return Method::cl;
  if (name == "tl") return Method::tl;
  if (name == "fedavg") return Method::fedavg;
  if (name == "sl") return Method::sl;
  if (name == "sl_plus" || name == "sl+") return Method::sl_plus;
  if (name == "sfl") return Method::sfl;
  throw ValidationError("unknown method \"" + name + "\"");
}

}  // namespace tlearn
