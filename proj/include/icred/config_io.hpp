#pragma once

#include <map>
#include <string>

namespace icred {

/// "key = value" text files: blank lines and '#' comments ignored.
/// Used for run configs and checkpoint sidecars.
using KvMap = std::map<std::string, std::string>;

KvMap read_kv_file(const std::string& path);
KvMap parse_kv(const std::string& text);
void write_kv_file(const std::string& path, const KvMap& kv);

}  // namespace icred
