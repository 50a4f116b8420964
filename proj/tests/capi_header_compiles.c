/* The public header must stay consumable from plain C. */
#include "semloc/semloc.h"

int capi_header_smoke(void) {
    return (int)SEMLOC_OK + (semloc_version() != 0);
}
