#include <cstdio>
int main() { std::puts("dgnet cli: not wired yet"); return 1; }
