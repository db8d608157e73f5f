#include <hjvar/run.hpp>

int main(int argc, char** argv) { return hjvar::run_command(argc, argv); }
