#include "axf/axf.h"

extern "C" const char* axf_version(void) { return "0.1.0"; }
