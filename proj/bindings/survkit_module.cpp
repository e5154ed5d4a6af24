// placeholder module; replaced once the pipeline API lands
#include <pybind11/pybind11.h>
PYBIND11_MODULE(_survkit, m) { m.doc() = "survival toolkit"; }
