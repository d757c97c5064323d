export * from "./types";
export { Tracker, TrackerInitError, startTracking } from "./tracker";
export { EventBatcher } from "./batcher";
export { CollectingSink, HttpSink } from "./sinks";
export { domAdapter } from "./dom";
