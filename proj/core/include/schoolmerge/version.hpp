#pragma once

namespace schoolmerge {
inline constexpr const char* kVersion = "0.1.0";
}
