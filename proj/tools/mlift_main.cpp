#include <mlift/mlift.hpp>
int main() { return 0; }
