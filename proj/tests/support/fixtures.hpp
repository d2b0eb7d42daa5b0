#pragma once

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "irg/infrastructure.hpp"

namespace irg_test {

// scratch location for files a test writes and reads back
inline std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "irg_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

inline std::string config_dir() {
  const char* dir = std::getenv("IRG_CONFIG_DIR");
  if (dir != nullptr && dir[0] != '\0') return dir;
  return "configs";  // running from the repo root
}

inline std::string config_path(const std::string& name) {
  return config_dir() + "/" + name;
}

inline irg::GameConfig load_fixture(const std::string& name) {
  return irg::load_config(config_path(name));
}

// single node behind the gateway, three zones (ordinary / shutdown / redirect)
inline irg::GameConfig one_node_config() {
  return irg::parse_config(R"(version 1
[game]
gamma 0.9
eta 0.4
utility_scale 1.0
p_brute 0.3
p_exploit 0.4
obs_space_size 4
[zones]
1 ordinary
2 shutdown
3 redirect
[costs]
null 0
access_control 2
move 1 0.1
move 2 10
move 3 15
[nodes]
1 0 1 1
)",
                           "one_node_config");
}

}  // namespace irg_test
