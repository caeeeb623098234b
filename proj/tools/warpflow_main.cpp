#include <cstdio>

int main() {
    std::fprintf(stderr, "warpflow: command-line front end under construction\n");
    return 2;
}
