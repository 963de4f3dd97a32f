/** The operator console application: catalog, instance control, live feed.
 *
 * All mutations go through the documented API and every view refreshes from
 * an authoritative GET afterwards; closing the console mid-run leaves no
 * trace on the server.
 */

import { ApiError, RangeApi } from "./api.js";
import { EventFeedConnection } from "./sse.js";
import { ConsoleViewState } from "./state.js";
import { layoutScenario, sensorBadge } from "./topology.js";
import type { EventRecord, InjectKind, ScenarioSummary } from "./types.js";

type Attrs = Record<string, string | ((event: Event) => void)>;

function el(tag: string, attrs: Attrs = {}, ...children: (Node | string)[]): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key, value);
    } else if (key === "class") {
      node.className = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  node.append(...children);
  return node;
}

const COMMANDS = ["start", "pause", "resume", "reset", "destroy"] as const;

export class ConsoleApp {
  readonly api: RangeApi;
  readonly state = new ConsoleViewState();
  stream: EventFeedConnection | null = null;

  private pending: Promise<unknown>[] = [];
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly root: HTMLElement,
    base = "",
    private readonly retryMs = 1500,
  ) {
    this.api = new RangeApi(base);
    this.state.onChange(() => this.render());
  }

  /** Await every in-flight action (test hook; harmless in production). */
  async whenIdle(): Promise<void> {
    while (this.pending.length) {
      const batch = this.pending;
      this.pending = [];
      await Promise.allSettled(batch);
    }
  }

  private track<T>(work: Promise<T>): Promise<T> {
    this.pending.push(work.catch(() => undefined));
    return work;
  }

  start(): void {
    void this.track(this.loadAll());
  }

  private async loadAll(): Promise<void> {
    try {
      const [catalog, kinds, instances] = await Promise.all([
        this.api.listScenarios(),
        this.api.listInjectKinds(),
        this.api.listInstances(),
      ]);
      this.state.catalog = catalog;
      this.state.injectKinds = kinds;
      this.state.instances = instances;
      if (this.state.connection === "degraded" || this.state.connection === "idle") {
        this.state.connection = this.stream ? this.state.connection : "idle";
      }
      this.state.lastError = null;
      this.state.notify();
    } catch (error) {
      this.state.connection = "degraded";
      this.state.lastError = describe(error);
      this.state.notify();
      this.retryTimer = setTimeout(() => void this.track(this.loadAll()), this.retryMs);
    }
  }

  dispose(): void {
    if (this.retryTimer) clearTimeout(this.retryTimer);
    this.stream?.stop();
  }

  // -- actions -----------------------------------------------------------

  launch(scenario: string, seed: number): Promise<void> {
    return this.track(
      (async () => {
        try {
          const created = await this.api.createInstance(scenario, seed);
          this.state.instances = await this.api.listInstances();
          await this.select(created.id);
        } catch (error) {
          this.fail(error);
        }
      })(),
    );
  }

  select(id: string): Promise<void> {
    return this.track(
      (async () => {
        this.stream?.stop();
        this.state.selectedId = id;
        this.state.selectedMissing = false;
        this.state.feed.clear();
        try {
          this.state.selected = await this.api.getInstance(id);
          this.state.selectedPlan = await this.api.getPlan(id);
        } catch (error) {
          if (error instanceof ApiError && error.status === 404) {
            this.state.selected = null;
            this.state.selectedPlan = null;
            this.state.selectedMissing = true;
            this.state.notify();
            return;
          }
          this.fail(error);
          return;
        }
        this.stream = new EventFeedConnection(this.api.base, id, {
          since: 0,
          onRecord: (record) => this.onRecord(record),
          onStatus: (status) => {
            this.state.connection = status;
            this.state.notify();
          },
          retryMs: 200,
        });
        this.stream.start();
        this.state.notify();
      })(),
    );
  }

  command(command: string): Promise<void> {
    const id = this.state.selectedId;
    if (!id) return Promise.resolve();
    return this.track(
      (async () => {
        try {
          await this.api.sendCommand(id, command);
        } catch (error) {
          this.fail(error);
        }
        await this.refreshInstance();
      })(),
    );
  }

  step(ticks: number): Promise<void> {
    const id = this.state.selectedId;
    if (!id || !Number.isInteger(ticks) || ticks < 1) return Promise.resolve();
    return this.track(
      (async () => {
        try {
          await this.api.step(id, ticks);
        } catch (error) {
          this.fail(error);
        }
        await this.refreshInstance();
      })(),
    );
  }

  /** Client-side schema validation: integer params; values below 1 are only
   * allowed where the catalog default itself is 0 (auto markers). */
  validateInjectParams(kind: InjectKind, params: Record<string, number>): string | null {
    for (const [name, value] of Object.entries(params)) {
      if (!(name in kind.params)) return `unknown parameter ${name}`;
      if (!Number.isInteger(value)) return `${name} must be an integer`;
      const minimum = kind.params[name] === 0 ? 0 : 1;
      if (value < minimum) return `${name} must be >= ${minimum}`;
    }
    return null;
  }

  fireInject(kindName: string, params: Record<string, number>, seed = 0): Promise<void> {
    const id = this.state.selectedId;
    const kind = this.state.injectKinds.find((k) => k.kind === kindName);
    if (!id || !kind) return Promise.resolve();
    const problem = this.validateInjectParams(kind, params);
    if (problem) {
      this.state.lastError = `inject blocked: ${problem}`;
      this.state.notify();
      return Promise.resolve(); // no request leaves the client
    }
    return this.track(
      (async () => {
        try {
          await this.api.fireInject(id, { kind: kindName, params, seed });
          this.state.lastError = null;
        } catch (error) {
          this.fail(error);
        }
        await this.refreshInstance();
      })(),
    );
  }

  forceStreamReconnect(): void {
    this.stream?.forceReconnect();
  }

  setFeedFilter(kind: string | null): void {
    this.state.feedFilter = kind;
    this.state.notify();
  }

  private async refreshInstance(): Promise<void> {
    const id = this.state.selectedId;
    if (!id) return;
    try {
      this.state.selected = await this.api.getInstance(id);
      this.state.selectedPlan = await this.api.getPlan(id);
      this.state.instances = await this.api.listInstances();
    } catch (error) {
      this.fail(error);
    }
    this.state.notify();
  }

  private onRecord(record: EventRecord): void {
    if (this.state.feed.push(record)) {
      this.state.notify();
    }
  }

  private fail(error: unknown): void {
    this.state.lastError = describe(error);
    this.state.notify();
  }

  // -- rendering -----------------------------------------------------------

  render(): void {
    const { state } = this;
    this.root.replaceChildren(
      this.renderBanner(),
      el(
        "main",
        { class: "layout" },
        this.renderCatalog(),
        state.selectedMissing ? this.renderNotFound() : this.renderInstance(),
        this.renderFeed(),
      ),
    );
  }

  private renderBanner(): HTMLElement {
    const { connection, lastError } = this.state;
    const banner = el("header", { class: `banner ${connection}`, "data-status": connection });
    banner.append(el("span", { class: "title" }, "rangeforge console"));
    banner.append(el("span", { class: "status" }, `link: ${connection}`));
    if (lastError) {
      banner.append(el("span", { class: "error", "data-role": "error" }, lastError));
    }
    return banner;
  }

  private renderCatalog(): HTMLElement {
    const panel = el("section", { class: "catalog", "data-role": "catalog" });
    panel.append(el("h2", {}, "Scenario catalog"));
    for (const scenario of this.state.catalog) {
      panel.append(this.renderScenarioCard(scenario));
    }
    if (this.state.instances.length) {
      panel.append(el("h2", {}, "Instances"));
      for (const instance of this.state.instances) {
        panel.append(
          el(
            "button",
            {
              class: "instance-link",
              "data-instance": instance.id,
              click: () => void this.select(instance.id),
            },
            `${instance.id} · ${instance.scenario} · ${instance.phase}`,
          ),
        );
      }
    }
    return panel;
  }

  private renderScenarioCard(scenario: ScenarioSummary): HTMLElement {
    const card = el("article", { class: "scenario-card", "data-scenario": scenario.name });
    card.append(el("h3", {}, scenario.name));
    const layout = layoutScenario(scenario);
    const diagram = el("div", { class: "topology" });
    for (const layer of ["attackers", "security", "targets", "operations"] as const) {
      const column = el("div", { class: `layer ${layer}` });
      column.append(el("h4", {}, layer));
      for (const placed of layout.layers[layer]) {
        const badge = sensorBadge(placed.node);
        column.append(
          el(
            "div",
            { class: "node-box", "data-node": placed.node.name },
            el("strong", {}, placed.node.name),
            el("small", {}, `${placed.node.role} · ${placed.node.os}`),
            el(
              "small",
              { class: "nets" },
              (layout.attachments[placed.node.name] ?? []).join(", "),
            ),
            ...(placed.node.services.length
              ? [
                  el(
                    "small",
                    { class: "services" },
                    placed.node.services.map((s) => `${s.kind}:${s.port}`).join(" "),
                  ),
                ]
              : []),
            ...(badge ? [el("span", { class: "sensor-badge" }, badge)] : []),
          ),
        );
      }
      diagram.append(column);
    }
    card.append(diagram);

    const seedInput = el("input", {
      type: "number",
      value: "42",
      class: "seed",
      "data-role": "seed",
    }) as HTMLInputElement;
    card.append(
      el(
        "form",
        {
          class: "launch",
          submit: (event) => {
            event.preventDefault();
            void this.launch(scenario.name, Number(seedInput.value) || 0);
          },
        },
        seedInput,
        el("button", { type: "submit", "data-action": "launch" }, "launch"),
      ),
    );
    return card;
  }

  private renderNotFound(): HTMLElement {
    return el(
      "section",
      { class: "instance missing", "data-role": "not-found" },
      el("h2", {}, "Instance not found"),
      el("p", {}, `No instance ${this.state.selectedId ?? ""} on this service.`),
    );
  }

  private renderInstance(): HTMLElement {
    const panel = el("section", { class: "instance", "data-role": "instance" });
    const state = this.state.selected;
    if (!state) {
      panel.append(el("p", { class: "hint" }, "Launch a scenario or pick an instance."));
      return panel;
    }
    panel.append(
      el(
        "h2",
        {},
        `${state.id} · ${state.scenario} `,
        el("span", { class: `phase ${state.phase}`, "data-role": "phase" }, state.phase),
      ),
      el("p", { class: "clock" }, `tick ${state.clock_ticks} · seed ${state.seed}`),
    );

    const vms = el("div", { class: "vms" });
    for (const [name, vmState] of Object.entries(state.vm_states)) {
      vms.append(
        el(
          "span",
          { class: `vm-badge ${vmState}`, "data-vm": name },
          `${name}: ${vmState}`,
        ),
      );
    }
    panel.append(vms);

    if (this.state.selectedPlan) {
      const plan = el("table", { class: "plan" });
      for (const [vm, host] of Object.entries(this.state.selectedPlan.assignments)) {
        plan.append(el("tr", {}, el("td", {}, vm), el("td", {}, host)));
      }
      panel.append(el("details", {}, el("summary", {}, "placement"), plan));
    }

    const controls = el("div", { class: "controls" });
    for (const command of COMMANDS) {
      controls.append(
        el(
          "button",
          { "data-command": command, click: () => void this.command(command) },
          command,
        ),
      );
    }
    const ticksInput = el("input", {
      type: "number",
      value: "10",
      "data-role": "ticks",
    }) as HTMLInputElement;
    controls.append(
      ticksInput,
      el(
        "button",
        {
          "data-action": "step",
          click: () => void this.step(Number(ticksInput.value)),
        },
        "step",
      ),
    );
    panel.append(controls);
    panel.append(this.renderInjectForm());
    return panel;
  }

  private renderInjectForm(): HTMLElement {
    const form = el("form", { class: "inject", "data-role": "inject-form" });
    const select = el("select", { "data-role": "inject-kind" }) as HTMLSelectElement;
    for (const kind of this.state.injectKinds) {
      select.append(el("option", { value: kind.kind }, kind.kind));
    }
    const paramBox = el("div", { class: "params" });

    const renderParams = () => {
      paramBox.replaceChildren();
      const kind = this.state.injectKinds.find((k) => k.kind === select.value);
      if (!kind) return;
      for (const [name, fallback] of Object.entries(kind.params)) {
        paramBox.append(
          el("label", {}, `${name} `, el("input", {
            type: "number",
            value: String(fallback),
            "data-param": name,
          })),
        );
      }
    };
    select.addEventListener("change", renderParams);

    form.append(select, paramBox, el("button", { type: "submit", "data-action": "fire" }, "fire inject"));
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const params: Record<string, number> = {};
      for (const input of Array.from(paramBox.querySelectorAll("input"))) {
        params[input.getAttribute("data-param")!] = Number(input.value);
      }
      void this.fireInject(select.value, params);
    });
    renderParams();
    return form;
  }

  private renderFeed(): HTMLElement {
    const panel = el("section", { class: "feed", "data-role": "feed" });
    panel.append(el("h2", {}, "Event feed"));

    const filter = el("select", { "data-role": "feed-filter" }) as HTMLSelectElement;
    for (const kind of ["all", "lifecycle", "flow", "alert", "drop", "anomaly", "inject", "delivery"]) {
      filter.append(el("option", { value: kind }, kind));
    }
    filter.value = this.state.feedFilter ?? "all";
    filter.addEventListener("change", () =>
      this.setFeedFilter(filter.value === "all" ? null : filter.value),
    );
    panel.append(
      el(
        "div",
        { class: "feed-controls" },
        filter,
        el(
          "button",
          { "data-action": "reconnect", click: () => this.forceStreamReconnect() },
          "reconnect",
        ),
      ),
    );

    const list = el("ol", { class: "records" });
    for (const record of this.state.feed.ofKind(this.state.feedFilter)) {
      list.append(
        el(
          "li",
          { class: `record ${record.kind}`, "data-seq": String(record.seq), "data-kind": record.kind },
          el("span", { class: "seq" }, `#${record.seq}`),
          el("span", { class: "tick" }, `t${record.tick}`),
          el("span", { class: "kind" }, record.kind),
          el("span", { class: "payload" }, summarize(record)),
        ),
      );
    }
    panel.append(list);
    return panel;
  }
}

function summarize(record: EventRecord): string {
  const payload = record.payload as Record<string, unknown>;
  switch (record.kind) {
    case "lifecycle":
      return `${payload.subject}: ${payload.from_state} -> ${payload.to_state}`;
    case "alert":
      return `sid ${payload.sid} ${payload.msg} (${payload.action_taken})`;
    case "anomaly":
      return `${payload.dst_ip}:${payload.dst_port} rate ${payload.observed_rate} >= ${payload.threshold}`;
    case "drop":
      return `${payload.reason} by ${payload.by}`;
    case "delivery":
      return `flow ${payload.flow_ref} -> ${payload.dst_node}`;
    case "inject":
      return `${payload.kind} (${payload.flow_count} flows)`;
    case "flow":
      return `${payload.src_ip} -> ${payload.dst_ip}:${payload.dst_port}`;
    default:
      return JSON.stringify(payload);
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
