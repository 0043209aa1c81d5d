import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { TaxisEnv, type BridgeOptions } from "../src/bridge.js";

/** Engine invocation used by the tests (module form; no PATH assumptions). */
export const ENGINE_COMMAND = ["python3", "-m", "taxisim.cli"];

export function baseConfig(overrides: Record<string, unknown> = {}) {
  return {
    landscape: {
      bounds: { x_min: -3, x_max: 3, y_min: -3, y_max: 3 },
      components: [
        { kind: "gaussian", center: [0, 0], scale: 0.8, channel: "food" },
      ],
    },
    salience: { mode: "fixed", fixed_value: 1.0 },
    policy: { kind: "run_and_tumble", params: { v_run: 0.3 } },
    environment: { dt_s: 0.05, episode_s: 2.0, start: { mode: "uniform" } },
    ...overrides,
  };
}

export function writeTempConfig(config: Record<string, unknown>): string {
  const dir = mkdtempSync(join(tmpdir(), "taxis-bridge-"));
  const path = join(dir, "config.json");
  writeFileSync(path, JSON.stringify(config));
  return path;
}

export function makeEnv(
  configPath: string,
  options: Partial<BridgeOptions> = {},
): TaxisEnv {
  return new TaxisEnv({ configPath, command: ENGINE_COMMAND, ...options });
}
