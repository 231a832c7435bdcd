#include <stdio.h>
#include <string.h>

#include "coopera.h"

#define CHECK(call)                                                              \
  do {                                                                           \
    CooperaStatus s_ = (call);                                                   \
    if (s_ != COOPERA_STATUS_OK) {                                               \
      fprintf(stderr, "%s -> %d %s\n", #call, (int)s_, coopera_last_error_message()); \
      return 1;                                                                  \
    }                                                                            \
  } while (0)

int main(void) {
  CooperaEngine *engine = NULL;
  CooperaProject *project = NULL;
  char *text = NULL;
  size_t deleted = 0, inserted = 0;

  CHECK(coopera_engine_new_mock(&engine));
  CHECK(coopera_project_new("c-smoke", "Tide", "A lighthouse keeper hides a stranger.", &project));
  CHECK(coopera_confirm(engine, project, COOPERA_STAGE_LOGLINE, NULL));

  if (coopera_generate(engine, project, COOPERA_STAGE_PLOTS, 1) != COOPERA_STATUS_STAGE_ORDER) {
    fprintf(stderr, "plots before characters should be refused\n");
    return 1;
  }
  if (strcmp(coopera_last_error_code(), "STAGE_ORDER") != 0) return 1;

  for (unsigned stage = COOPERA_STAGE_CHARACTERS; stage <= COOPERA_STAGE_DIALOGUES; stage++) {
    CHECK(coopera_generate(engine, project, stage, 7));
    CHECK(coopera_confirm(engine, project, stage, NULL));
  }
  CHECK(coopera_project_validate(project, &text));
  if (strcmp(text, "[]") != 0) {
    fprintf(stderr, "violations: %s\n", text);
    return 1;
  }
  coopera_string_free(text);

  CHECK(coopera_project_screenplay(project, &text));
  printf("%zu bytes of screenplay, revision %llu\n", strlen(text),
         (unsigned long long)coopera_project_revision(project));
  coopera_string_free(text);

  CHECK(coopera_diff_lengths("kitten", "sitting", &deleted, &inserted));
  if (deleted != 2 || inserted != 3) return 1;

  coopera_project_free(project);
  coopera_engine_free(engine);
  return 0;
}
