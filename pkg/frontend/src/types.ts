/** Wire types mirroring the control-plane JSON bodies. */

export interface ServiceSummary {
  kind: string;
  port: number;
}

export interface SensorSummary {
  engine: string;
  mode: "ids" | "ips";
  tap_network: string | null;
}

export interface InterfaceSummary {
  name: string;
  network: string;
  ip: string | null;
}

export interface NodeSummary {
  name: string;
  role: string;
  os: string;
  cpu: number;
  ram_mb: number;
  interfaces: InterfaceSummary[];
  services: ServiceSummary[];
  sensor: SensorSummary | null;
  fw_rules: string[];
}

export interface ScenarioSummary {
  name: string;
  source: string;
  networks: { name: string; external: boolean }[];
  nodes: NodeSummary[];
  subnets: Record<string, string>;
  ip_assignments: Record<string, string>;
}

export interface InstanceSummary {
  id: string;
  scenario: string;
  phase: string;
  clock_ticks: number;
}

export interface InstanceState {
  id: string;
  scenario: string;
  phase: string;
  clock_ticks: number;
  seed: number;
  vm_states: Record<string, string>;
  plan: PlacementPlan;
}

export interface PlacementPlan {
  assignments: Record<string, string>;
  residuals: Record<string, { cpu: number; ram_mb: number }>;
}

export interface InjectKind {
  kind: string;
  tag: string;
  requires_service: string | null;
  params: Record<string, number>;
  description: string;
}

export interface InjectResult {
  inject_id: string;
  flow_count: number;
  summary: Record<string, number>;
}

export interface EventRecord {
  seq: number;
  tick: number;
  kind: string;
  payload: Record<string, unknown>;
}

export type ConnectionStatus = "connected" | "reconnecting" | "idle" | "degraded";
