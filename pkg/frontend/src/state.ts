/** Console view state: everything the DOM renders derives from here, and
 * everything here derives from API responses; the client invents nothing. */

import { FeedBuffer } from "./feed.js";
import type {
  ConnectionStatus,
  InjectKind,
  InstanceState,
  InstanceSummary,
  PlacementPlan,
  ScenarioSummary,
} from "./types.js";

export class ConsoleViewState {
  catalog: ScenarioSummary[] = [];
  injectKinds: InjectKind[] = [];
  instances: InstanceSummary[] = [];
  selectedId: string | null = null;
  selected: InstanceState | null = null;
  selectedPlan: PlacementPlan | null = null;
  selectedMissing = false;
  feed = new FeedBuffer(500);
  feedFilter: string | null = null;
  connection: ConnectionStatus = "idle";
  lastError: string | null = null;

  private listeners: (() => void)[] = [];

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  notify(): void {
    for (const listener of this.listeners) listener();
  }
}
