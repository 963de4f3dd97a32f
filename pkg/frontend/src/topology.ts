/** Static layered topology layout, in the visual idiom of the scenario
 * diagrams: attacker side on the left, the security layer in the middle,
 * targets on the right, management/monitoring nodes in a fourth column.
 * Deterministic by construction; no physics, no randomness. */

import type { NodeSummary, ScenarioSummary } from "./types.js";

export type LayerName = "attackers" | "security" | "targets" | "operations";

export interface PlacedNode {
  node: NodeSummary;
  layer: LayerName;
  /** 0-based row within the layer column. */
  row: number;
}

export interface TopologyLayout {
  layers: Record<LayerName, PlacedNode[]>;
  /** network name -> display hue index (stable by declaration order). */
  networkHue: Record<string, number>;
  /** node name -> networks its interfaces attach to, in declaration order. */
  attachments: Record<string, string[]>;
}

const LAYER_OF_ROLE: Record<string, LayerName> = {
  attacker: "attackers",
  firewall: "security",
  router: "security",
  target: "targets",
  monitor: "operations",
  operator: "operations",
};

export function layoutScenario(scenario: ScenarioSummary): TopologyLayout {
  const layers: Record<LayerName, PlacedNode[]> = {
    attackers: [],
    security: [],
    targets: [],
    operations: [],
  };
  const attachments: Record<string, string[]> = {};
  for (const node of scenario.nodes) {
    const layer = LAYER_OF_ROLE[node.role] ?? "targets";
    layers[layer].push({ node, layer, row: layers[layer].length });
    attachments[node.name] = node.interfaces.map((iface) => iface.network);
  }
  const networkHue: Record<string, number> = {};
  scenario.networks.forEach((net, index) => {
    networkHue[net.name] = index;
  });
  return { layers, networkHue, attachments };
}

export function sensorBadge(node: NodeSummary): string | null {
  if (!node.sensor) return null;
  const attach = node.sensor.tap_network ? `tap:${node.sensor.tap_network}` : "inline";
  return `${node.sensor.engine} ${node.sensor.mode.toUpperCase()} (${attach})`;
}
