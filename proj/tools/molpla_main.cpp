#include <iostream>

#include "molpla/service.hpp"

int main(int argc, char** argv) { return molpla::run_cli(argc, argv, std::cout, std::cerr); }
