/* End-to-end walk through the C API: open a store, register a source,
 * write facts through the gate (watching one get rejected), read them back
 * through the gated pipeline, verify the chain, and close.
 *
 * Build from the repository root:
 *
 *   cargo build -p ssgm-ffi
 *   cc crates/ssgm-ffi/examples/demo.c \
 *      -Icrates/ssgm-ffi/include \
 *      target/debug/libssgm_ffi.a -lpthread -ldl -lm -o demo
 *   ./demo /tmp/ssgm-demo
 */

#include <inttypes.h>
#include <stdio.h>
#include <stdlib.h>

#include "ssgm.h"

static int check(const char *what, SsgmStatus status) {
    if (status != SSGM_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)status,
                ssgm_last_error_message());
        return 1;
    }
    return 0;
}

int main(int argc, char **argv) {
    const char *data_dir = argc > 1 ? argv[1] : "ssgm-demo-data";

    if (ssgm_abi_version() != SSGM_ABI_VERSION) {
        fprintf(stderr, "header/library mismatch: %u vs %u\n",
                SSGM_ABI_VERSION, ssgm_abi_version());
        return 1;
    }

    SsgmEngine *engine = NULL;
    if (check("open", ssgm_engine_open(data_dir, NULL, &engine)))
        return 1;
    if (check("register", ssgm_register_source(engine, "assistant")))
        return 1;
    /* Reads deny by default; a demo store can afford a blanket allow. */
    if (check("policy", ssgm_install_policy(engine, "*\t\tallow")))
        return 1;

    /* A core fact: the anchor later writes are checked against. */
    uint64_t idx = 0, seq = 0;
    if (check("add core",
              ssgm_add(engine, "assistant", "the user lives in Paris",
                       "profile", "[[\"user\",\"city\",\"Paris\"]]",
                       /*core=*/true, /*privileged=*/false, &idx, &seq)))
        return 1;
    printf("core fact admitted: idx=%" PRIu64 " seq=%" PRIu64 "\n", idx, seq);

    if (check("add plain",
              ssgm_add(engine, "assistant", "the user enjoys hiking",
                       "profile", NULL, false, false, &idx, &seq)))
        return 1;
    printf("plain fact admitted: idx=%" PRIu64 " seq=%" PRIu64 "\n", idx, seq);

    /* This one contradicts the core fact, so the gate must refuse it. */
    SsgmStatus verdict =
        ssgm_add(engine, "assistant", "the user lives in Lyon", "profile",
                 "[[\"user\",\"city\",\"Lyon\"]]", false, false, NULL, &seq);
    if (verdict != SSGM_STATUS_REJECTED) {
        fprintf(stderr, "contradiction slipped through (%d)\n", (int)verdict);
        return 1;
    }
    printf("contradiction rejected, audit entry seq=%" PRIu64 ": %s\n", seq,
           ssgm_last_error_message());

    char *units = NULL;
    if (check("retrieve",
              ssgm_retrieve(engine, "assistant", NULL, "where does the user live",
                            3, &units)))
        return 1;
    printf("retrieved: %s\n", units);
    ssgm_string_free(units);

    uint64_t entries = 0;
    if (check("verify", ssgm_verify_chain(engine, &entries)))
        return 1;
    printf("chain valid: %" PRIu64 " entries\n", entries);

    ssgm_engine_close(engine);
    printf("done\n");
    return 0;
}
