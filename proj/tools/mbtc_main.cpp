#include <string>
#include <vector>

#include <mbtc/cli.hpp>

int main(int argc, char** argv) {
  return mbtc::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
