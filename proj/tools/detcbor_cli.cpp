// placeholder until the subcommands land
#include <cstdio>

int main() {
    std::fprintf(stderr, "detcbor: not yet implemented\n");
    return 2;
}
