// Writes the golden wire vectors, one lowercase hex line per file. Run by
// hand after an intended layout change; the wire test compares against them.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "wire_fixtures.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_golden <dir>\n";
    return 1;
  }
  std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  for (const auto& [name, bytes] : wirefixtures::all()) {
    std::ofstream out(dir / (name + ".hex"));
    out << crlmesh::to_hex(bytes) << '\n';
    std::cout << name << ": " << bytes.size() << " bytes\n";
  }
  return 0;
}
