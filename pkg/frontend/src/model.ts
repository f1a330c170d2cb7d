/** Wire types mirroring the auth service API, field for field. */

export type EventKind =
  | "window_pass"
  | "window_failure"
  | "warning_triggered"
  | "stepup_requested"
  | "terminated"
  | "verified"
  | "data_gap";

export type SessionStatusName = "active" | "terminated" | "verified-pending-stepup";

export type OperatorAction = "terminate" | "request_stepup" | "mark_verified";

export interface WarningEvent {
  session_id: string;
  window_index: number; // -1 for action/stream events without a window
  kind: EventKind;
  score: number | null;
  threshold: number | null;
  timestamp: number;
}

export interface SessionStatus {
  session_id: string;
  user_id: string;
  status: SessionStatusName;
  window_count: number;
  failure_count: number;
  consecutive_failures: number;
  recent_scores: (number | null)[];
  event_count: number;
}

export interface SessionSummary {
  session_id: string;
  user_id: string;
  status: SessionStatusName;
  window_count: number;
}

export interface SampleIn {
  t: number;
  ax: number;
  ay: number;
  az: number;
}
