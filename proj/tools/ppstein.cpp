#include "ppstein/cli.hpp"

int main(int argc, char** argv)
{
    return ppstein::cli::run(argc, argv);
}
