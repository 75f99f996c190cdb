// Fallback for builds without the AVX2 translation unit (non-x86 targets).

#include "stackcount/kernels.h"

namespace stackcount::kernels {

const Table* avx2_table() { return nullptr; }

}  // namespace stackcount::kernels
