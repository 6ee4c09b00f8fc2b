/*
 * Conformance driver for emitted conversion kernels.
 *
 * One kernel is baked in per binary via -DKERNEL=<name>; the kernel's header
 * supplies <name>_N_INPUTS, <name>_N_STATE and, when stateful, the state
 * struct <name>_state_t.  Vector files are replayed in row order from fresh
 * (zeroed) state so sequence kernels see one contiguous sequence.
 *
 * Usage: harness_<name> <vectors.csv> <tolerance> [dump.csv]
 *
 * Prints the maximum |error| * 100 / range over all rows and exits 0 iff it
 * is within the tolerance.  The range comes from the vector file's leading
 * "# range <lo> <hi>" line (defaults to [0, 1] if absent).  Parsing uses
 * strtod with the C locale only; vectors always carry '.' decimal points.
 */

#include <errno.h>
#include <locale.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define CAT2(a, b) a##b
#define CAT(a, b) CAT2(a, b)
#define STR2(x) #x
#define STR(x) STR2(x)

#include STR(KERNEL.h)

#define N_INPUTS CAT(KERNEL, _N_INPUTS)
#define N_STATE CAT(KERNEL, _N_STATE)

#if N_INPUTS > 8
#error "driver supports at most 8 inputs"
#endif

int main(int argc, char **argv)
{
    if (argc < 3) {
        fprintf(stderr, "usage: %s <vectors.csv> <tolerance> [dump.csv]\n", argv[0]);
        return 2;
    }
    setlocale(LC_NUMERIC, "C");
    FILE *f = fopen(argv[1], "r");
    if (!f) {
        fprintf(stderr, "E: cannot open %s\n", argv[1]);
        return 2;
    }
    char *end = NULL;
    double tolerance = strtod(argv[2], &end);
    if (end == argv[2]) {
        fprintf(stderr, "E: bad tolerance %s\n", argv[2]);
        return 2;
    }
    FILE *dump = NULL;
    if (argc > 3) {
        dump = fopen(argv[3], "w");
        if (!dump) {
            fprintf(stderr, "E: cannot open %s for writing\n", argv[3]);
            return 2;
        }
    }

    double range_lo = 0.0, range_hi = 1.0;
    double max_err = -1.0;
    long worst_row = -1;
    long row = 0;
    char line[8192];
#if N_STATE > 0
    CAT(KERNEL, _state_t) state;
    memset(&state, 0, sizeof state);
#endif

    while (fgets(line, sizeof line, f)) {
        if (line[0] == '#') {
            if (sscanf(line, "# range %lf %lf", &range_lo, &range_hi) == 2 &&
                range_hi <= range_lo) {
                fprintf(stderr, "E: bad range line\n");
                return 2;
            }
            continue;
        }
        if (strncmp(line, "in0", 3) == 0)
            continue; /* header */
        float in[8];
        const char *p = line;
        int bad = 0;
        for (int k = 0; k < N_INPUTS; k++) {
            char *stop = NULL;
            in[k] = (float)strtod(p, &stop);
            if (stop == p || *stop != ',') { bad = 1; break; }
            p = stop + 1;
        }
        char *stop = NULL;
        double expected = strtod(p, &stop);
        if (bad || stop == p) {
            fprintf(stderr, "E: parse failure at data row %ld\n", row);
            return 2;
        }
#if N_STATE > 0
        float got = KERNEL(in, &state);
#else
        float got = KERNEL(in);
#endif
        if (dump)
            fprintf(dump, "%.9g\n", (double)got);
        double err = ((double)got - expected) * 100.0 / (range_hi - range_lo);
        if (err < 0.0)
            err = -err;
        if (err > max_err) {
            max_err = err;
            worst_row = row;
        }
        row++;
    }
    fclose(f);
    if (dump)
        fclose(dump);
    if (row == 0) {
        fprintf(stderr, "E: no data rows\n");
        return 2;
    }

    int ok = max_err <= tolerance;
    printf("%s rows=%ld max_normalized_error=%.6e tolerance=%.1e %s\n",
           STR(KERNEL), row, max_err, tolerance, ok ? "PASS" : "FAIL");
    if (!ok)
        printf("worst row: %ld\n", worst_row);
    return ok ? 0 : 1;
}
