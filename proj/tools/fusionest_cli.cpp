// Placeholder main; the full CLI is wired up with the harness.
int main() { return 0; }
