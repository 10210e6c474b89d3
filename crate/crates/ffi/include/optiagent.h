#ifndef OPTIAGENT_H
#define OPTIAGENT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum OaStatus {
  OA_STATUS_OK = 0,
  OA_STATUS_NULL_ARGUMENT = 1,
  OA_STATUS_INVALID_UTF8 = 2,
  OA_STATUS_INVALID_JSON = 3,
  OA_STATUS_INVALID_REQUEST = 4,
  OA_STATUS_NOT_FOUND = 5,
  OA_STATUS_BUSY = 6,
  OA_STATUS_ALREADY_RESOLVED = 7,
  OA_STATUS_IO = 8,
  OA_STATUS_INTERNAL = 9,
} OaStatus;

// Opaque service handle.
typedef struct OaGateway OaGateway;

// Opaque vector store handle.
typedef struct OaStore OaStore;

// Opaque topology handle.
typedef struct OaTopology OaTopology;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *oa_last_error(void);

// Library version, static storage.
const char *oa_version(void);

// # Safety
// `s` is NULL or a string returned by this library and not yet freed.
void oa_string_free(char *s);

// Loads a topology file, or a bundled one by name (`conus`, `single_span`).
//
// # Safety
// `reference` is a NUL-terminated string; `out` is writable.
enum OaStatus oa_topology_load(const char *reference, struct OaTopology **out);

// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum OaStatus oa_topology_from_json(const char *json, struct OaTopology **out);

// Seeded synthetic topology with the default span profile.
//
// # Safety
// `out` is writable.
enum OaStatus oa_topology_generate(size_t nodes,
                                   size_t links,
                                   uint64_t seed,
                                   struct OaTopology **out);

// # Safety
// `topo` is a live handle; `out` is writable.
enum OaStatus oa_topology_to_json(const struct OaTopology *topo, char **out);

// # Safety
// `topo` is NULL or a handle not yet freed.
void oa_topology_free(struct OaTopology *topo);

// GSNR report for every grid channel (or `channel` when non-negative)
// launched at `power_dbm` over the comma-separated node route.
//
// # Safety
// `topo` is a live handle; strings are NUL-terminated; `out` is writable.
enum OaStatus oa_qot_estimate(const struct OaTopology *topo,
                              const char *route_csv,
                              double power_dbm,
                              const char *modulation,
                              int64_t channel,
                              char **out);

// First-fit provisioning of a JSON demand list over `k` shortest paths.
//
// # Safety
// `topo` is a live handle; `demands_json` is NUL-terminated; `out` is writable.
enum OaStatus oa_netops_provision(const struct OaTopology *topo,
                                  const char *demands_json,
                                  size_t k,
                                  char **out);

// Provisions, then maximises the minimum margin with `step_db` moves.
//
// # Safety
// `topo` is a live handle; `demands_json` is NUL-terminated; `out` is writable.
enum OaStatus oa_netops_optimize(const struct OaTopology *topo,
                                 const char *demands_json,
                                 size_t k,
                                 double step_db,
                                 size_t max_rounds,
                                 char **out);

// The bundled document library, indexed.
//
// # Safety
// `out` is writable.
enum OaStatus oa_store_bundled(struct OaStore **out);

// Reads a store file written by `rag index`.
//
// # Safety
// `path` is NUL-terminated; `out` is writable.
enum OaStatus oa_store_load(const char *path, struct OaStore **out);

// Top-`k` hits as a JSON list.
//
// # Safety
// `store` is a live handle; `query` is NUL-terminated; `out` is writable.
enum OaStatus oa_store_retrieve(const struct OaStore *store,
                                const char *query,
                                size_t k,
                                char **out);

// # Safety
// `store` is NULL or a handle not yet freed.
void oa_store_free(struct OaStore *store);

// Compresses, ranks and explains the latest window of line-delimited
// alarm records with the bundled rulebase and manual.
//
// # Safety
// `ndjson` is NUL-terminated; `out` is writable.
enum OaStatus oa_alarms_analyze(const char *ndjson, char **out);

// Opens a service instance. `config_toml` may be NULL for defaults;
// `data_dir`, when non-NULL, overrides the configured directory.
//
// # Safety
// Strings are NULL or NUL-terminated; `out` is writable.
enum OaStatus oa_gateway_open(const char *config_toml,
                              const char *data_dir,
                              struct OaGateway **out);

// # Safety
// `gw` is NULL or a handle not yet freed.
void oa_gateway_free(struct OaGateway *gw);

// Writes the new session id.
//
// # Safety
// `gw` is a live handle; `topology` is NUL-terminated; `out_id` is writable.
enum OaStatus oa_gateway_create_session(const struct OaGateway *gw,
                                        const char *topology,
                                        char **out_id);

// Starts an agent run and writes its job id.
//
// # Safety
// `gw` is a live handle; strings are NUL-terminated; `out_job` is writable.
enum OaStatus oa_gateway_submit_query(const struct OaGateway *gw,
                                      const char *session,
                                      const char *query,
                                      char **out_job);

// Job status and final answer as JSON.
//
// # Safety
// `gw` is a live handle; strings are NUL-terminated; `out` is writable.
enum OaStatus oa_gateway_job(const struct OaGateway *gw,
                             const char *session,
                             const char *job,
                             char **out);

// Step records of one job as a JSON list.
//
// # Safety
// `gw` is a live handle; strings are NUL-terminated; `out` is writable.
enum OaStatus oa_gateway_transcript(const struct OaGateway *gw,
                                    const char *session,
                                    const char *job,
                                    char **out);

// Tickets of a session (all sessions when NULL) as a JSON list.
//
// # Safety
// `gw` is a live handle; `session` is NULL or NUL-terminated; `out` is writable.
enum OaStatus oa_gateway_tickets(const struct OaGateway *gw, const char *session, char **out);

// Resolves a PENDING ticket and writes the updated ticket.
//
// # Safety
// `gw` is a live handle; `ticket` is NUL-terminated, `note` NULL or
// NUL-terminated; `out` is NULL or writable.
enum OaStatus oa_gateway_resolve_approval(const struct OaGateway *gw,
                                          const char *ticket,
                                          bool approved,
                                          const char *note,
                                          char **out);

// Live network state and its digest as JSON.
//
// # Safety
// `gw` is a live handle; `session` is NUL-terminated; `out` is writable.
enum OaStatus oa_gateway_network_state(const struct OaGateway *gw, const char *session, char **out);

// Appends line-delimited alarm records; writes `{accepted, errors}`.
//
// # Safety
// `gw` is a live handle; strings are NUL-terminated; `out` is writable.
enum OaStatus oa_gateway_ingest_alarms(const struct OaGateway *gw,
                                       const char *session,
                                       const char *ndjson,
                                       char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTIAGENT_H */
