export {
  PROTOCOL_VERSION,
  ProtocolError,
  EngineError,
  TaxisEnv,
  type BridgeOptions,
  type EnvSpec,
  type SpaceSpec,
  type StepResult,
} from "./bridge.js";
