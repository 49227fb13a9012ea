#pragma once

// C declarations of the vendored PQClean primitives used by the adapters.

extern "C" {
#include "common/fips202.h"
#include "common/randombytes.h"
#include "common/sha2.h"

#include "crypto_sign/falcon-1024/clean/api.h"
#include "crypto_sign/falcon-512/clean/api.h"
#include "crypto_sign/ml-dsa-44/clean/api.h"
#include "crypto_sign/ml-dsa-65/clean/api.h"
#include "crypto_sign/sphincs-sha2-128f-simple/clean/api.h"
#include "crypto_sign/sphincs-sha2-128s-simple/clean/api.h"
}
