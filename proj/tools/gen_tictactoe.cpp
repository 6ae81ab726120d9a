// Writes the tic-tac-toe endgame table as CSV (stdout, or the path given).
#include <fstream>
#include <iostream>

#include "drm/synthetic.hpp"

int main(int argc, char** argv) {
  const std::string csv = drm::tictactoe_csv();
  if (argc < 2) {
    std::cout << csv;
    return 0;
  }
  std::ofstream out(argv[1], std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << argv[1] << '\n';
    return 1;
  }
  out << csv;
  return out ? 0 : 1;
}
