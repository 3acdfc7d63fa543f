/* Build: cargo build --release -p lora-coexist-ffi
 *        cc demo.c -I../include -L../../../target/release -llora_coexist_ffi -o demo
 *        LD_LIBRARY_PATH=../../../target/release ./demo
 */
#include <stdio.h>
#include "lora_coexist.h"

static const char *CONFIG =
    "[sim]\n"
    "duration_ms = 2e7\n"
    "[network]\n"
    "nodes = 200\n"
    "[interference]\n"
    "count = 4\n"
    "distance_m = 99.0\n";

static int report(LcStatus status) {
    char msg[256];
    lc_last_error_message(msg, sizeof msg);
    fprintf(stderr, "error %d: %s\n", (int)status, msg);
    return 1;
}

int main(void) {
    LcScenario *scenario = NULL;
    LcRun *run = NULL;
    LcStatus status;
    size_t networks = 0;

    if ((status = lc_scenario_from_toml(CONFIG, &scenario)) != LC_STATUS_OK) return report(status);
    if ((status = lc_run(scenario, 1, 0.0, &run)) != LC_STATUS_OK) return report(status);
    lc_run_network_count(run, &networks);

    printf("lora-coexist %s\n", lc_version());
    for (size_t i = 0; i < networks; i++) {
        LcNetworkStats stats;
        double der = 0.0;
        lc_run_network_stats(run, i, &stats);
        lc_run_der(run, i, &der);
        printf("network %zu: sent %llu received %llu DER %.3f\n", i,
               (unsigned long long)stats.sent, (unsigned long long)stats.received, der);
    }

    lc_run_free(run);
    lc_scenario_free(scenario);
    return 0;
}
