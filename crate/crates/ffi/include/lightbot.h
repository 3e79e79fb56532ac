#ifndef LIGHTBOT_H
#define LIGHTBOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum LbStatus {
  LB_STATUS_OK = 0,
  LB_STATUS_NULL_POINTER = 1,
  LB_STATUS_INVALID_UTF8 = 2,
  LB_STATUS_PARSE = 3,
  LB_STATUS_EXECUTION = 4,
  LB_STATUS_UNSOLVABLE = 5,
  LB_STATUS_COMPRESSION = 6,
  LB_STATUS_PANIC = 7,
} LbStatus;

/*
 How an execution ended.
 */
typedef enum LbExecStatus {
  LB_EXEC_STATUS_COMPLETED = 0,
  LB_EXEC_STATUS_PROGRAM_ENDED = 1,
  LB_EXEC_STATUS_STEP_BUDGET_EXHAUSTED = 2,
  LB_EXEC_STATUS_DEPTH_EXCEEDED = 3,
} LbExecStatus;

/*
 A hierarchical program.
 */
typedef struct LbProgram LbProgram;

/*
 A validated puzzle.
 */
typedef struct LbPuzzle LbPuzzle;

/*
 The result of running a program on a puzzle.
 */
typedef struct LbTrace LbTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failing call on this thread, or NULL. The pointer
 stays valid until the next failing call on this thread.
 */
const char *lb_last_error_message(void);

/*
 Library version, a static string.
 */
const char *lb_version(void);

/*
 Parses a puzzle document.

 # Safety
 `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LbStatus lb_puzzle_parse(const char *json, struct LbPuzzle **out);

/*
 # Safety
 `puzzle` must come from [`lb_puzzle_parse`] and not be used afterwards.
 NULL is ignored.
 */
void lb_puzzle_free(struct LbPuzzle *puzzle);

/*
 Parses a program document.

 # Safety
 `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LbStatus lb_program_parse(const char *json, struct LbProgram **out);

/*
 # Safety
 `program` must come from [`lb_program_parse`] and not be used
 afterwards. NULL is ignored.
 */
void lb_program_free(struct LbProgram *program);

/*
 Stored instruction count over main and every subprocess.

 # Safety
 `program` must be a live handle and `out` a writable pointer.
 */
enum LbStatus lb_program_length(const struct LbProgram *program, size_t *out);

/*
 Runs `program` on `puzzle`. Zero limits select the defaults.

 # Safety
 Both handles must be live and `out` a writable pointer.
 */
enum LbStatus lb_execute(const struct LbPuzzle *puzzle,
                         const struct LbProgram *program,
                         size_t max_steps,
                         size_t max_depth,
                         struct LbTrace **out);

/*
 # Safety
 `trace` must come from [`lb_execute`] and not be used afterwards. NULL
 is ignored.
 */
void lb_trace_free(struct LbTrace *trace);

/*
 # Safety
 `trace` must be a live handle and `out` a writable pointer.
 */
enum LbStatus lb_trace_status(const struct LbTrace *trace, enum LbExecStatus *out);

/*
 Number of primitive actions executed.

 # Safety
 `trace` must be a live handle and `out` a writable pointer.
 */
enum LbStatus lb_trace_action_count(const struct LbTrace *trace, size_t *out);

/*
 Lights on in the final state.

 # Safety
 `trace` must be a live handle and `out` a writable pointer.
 */
enum LbStatus lb_trace_lights_on(const struct LbTrace *trace, uint32_t *out);

/*
 Trace as JSON (`actions`, `frames`, `status`).

 # Safety
 `trace` must be a live handle and `out` a writable pointer.
 */
enum LbStatus lb_trace_to_json(const struct LbTrace *trace, char **out);

/*
 Compresses a JSON array of action tokens (`"walk"`, `"jump"`, `"left"`,
 `"right"`, `"light"`) and writes the summary JSON.

 # Safety
 `actions_json` must be a NUL-terminated string and `out` a writable
 pointer.
 */
enum LbStatus lb_compress(const char *actions_json, size_t max_procs, bool recursion, char **out);

/*
 Shortest flat solution as a JSON array of action tokens.
 Returns `LB_STATUS_UNSOLVABLE` if no sequence completes the puzzle.

 # Safety
 `puzzle` must be a live handle and `out` a writable pointer.
 */
enum LbStatus lb_solve_exact(const struct LbPuzzle *puzzle, char **out);

/*
 # Safety
 `s` must come from this library and not be used afterwards. NULL is
 ignored.
 */
void lb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIGHTBOT_H */
