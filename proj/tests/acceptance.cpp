#include "cavicrys/cavicrys.hpp"
int main(){return 0;}
