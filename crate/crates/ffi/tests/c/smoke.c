#include <stdio.h>
#include <string.h>
#include "lightbot.h"

static const char *PUZZLE = "{\"width\":2,\"height\":1,\"tiles\":[[{\"h\":0,\"light\":false},{\"h\":0,\"light\":true}]],\"start\":{\"x\":0,\"y\":0,\"dir\":\"E\"},\"name\":\"line\"}";

int main(int argc, char **argv) {
    const char *puzzle_json = argc > 1 ? argv[1] : PUZZLE;
    LbPuzzle *puzzle = NULL;
    if (lb_puzzle_parse(puzzle_json, &puzzle) != LB_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", lb_last_error_message());
        return 1;
    }
    char *path = NULL;
    if (lb_solve_exact(puzzle, &path) != LB_STATUS_OK) return 2;

    LbProgram *program = NULL;
    char doc[512];
    snprintf(doc, sizeof doc, "{\"main\":%s}", path);
    if (lb_program_parse(doc, &program) != LB_STATUS_OK) return 3;
    LbTrace *trace = NULL;
    if (lb_execute(puzzle, program, 0, 0, &trace) != LB_STATUS_OK) return 4;
    LbExecStatus status;
    size_t steps = 0;
    lb_trace_status(trace, &status);
    lb_trace_action_count(trace, &steps);
    printf("%s %zu %d\n", path, steps, status == LB_EXEC_STATUS_COMPLETED);

    if (lb_program_parse("{\"main\":[\"fly\"]}", &program) != LB_STATUS_PARSE) return 5;
    if (lb_last_error_message() == NULL) return 6;

    lb_trace_free(trace);
    lb_program_free(program);
    lb_string_free(path);
    lb_puzzle_free(puzzle);
    return 0;
}
