// UI state and its pure update functions.
//
// Everything on screen derives from gateway responses plus user input:
// trajectories and detections come from assets/events, never from any
// client-side simulation, so a hard refresh reproduces identical views.

import type {
  Asset,
  CommandAsset,
  CommandStatus,
  CommitEvent,
  ContractName,
  ObjectAsset,
  PoseEvent,
  RobotInfo,
  TrajectoryPoint,
  WorldSpec,
} from './types.js';
import type { FeedStatus } from './api.js';

export interface TrackedCommand {
  assetId: string;
  txId: string;
  robotId: string;
  waypoints: [number, number, number][];
  // submitted -> committed (VALID) / failed (other code) -> executing -> done
  phase: 'submitted' | 'committed' | 'failed' | 'executing' | 'done';
  validationCode?: string;
}

export interface UiState {
  channel: string;
  channels: string[];
  contractFilter: ContractName;
  assets: Asset[];
  sortDescending: boolean;
  selectedAssetId: string | null;
  robots: RobotInfo[];
  world: WorldSpec | null;
  trajectories: Record<string, TrajectoryPoint[]>;
  poses: Record<string, PoseEvent>;
  objects: ObjectAsset[];
  commands: TrackedCommand[];
  connection: FeedStatus;
  lastError: string | null;
}

export function initialState(): UiState {
  return {
    channel: 'fleet',
    channels: [],
    contractFilter: 'path',
    assets: [],
    sortDescending: false,
    selectedAssetId: null,
    robots: [],
    world: null,
    trajectories: {},
    poses: {},
    objects: [],
    commands: [],
    connection: 'connecting',
    lastError: null,
  };
}

export function sortAssets(assets: Asset[], descending: boolean): Asset[] {
  // stamps are nanosecond strings; compare numerically via BigInt
  const sorted = [...assets].sort((a, b) => {
    const sa = BigInt(a.stamp);
    const sb = BigInt(b.stamp);
    if (sa === sb) {
      return a.asset_id < b.asset_id ? -1 : 1;
    }
    return sa < sb ? -1 : 1;
  });
  return descending ? sorted.reverse() : sorted;
}

export function applyPose(state: UiState, pose: PoseEvent): UiState {
  return { ...state, poses: { ...state.poses, [pose.robot_id]: pose } };
}

export function setTrajectory(
  state: UiState,
  robotId: string,
  points: TrajectoryPoint[],
): UiState {
  return { ...state, trajectories: { ...state.trajectories, [robotId]: points } };
}

export function applyCommit(state: UiState, event: CommitEvent): UiState {
  const commands = state.commands.map((cmd): TrackedCommand => {
    if (cmd.txId !== event.tx_id || cmd.phase !== 'submitted') {
      return cmd;
    }
    const ok = event.validation_code === 'VALID';
    return {
      ...cmd,
      phase: ok ? 'committed' : 'failed',
      validationCode: event.validation_code,
    };
  });
  return { ...state, commands };
}

export function trackCommand(
  state: UiState,
  receipt: { asset_id: string; tx_id: string },
  robotId: string,
  waypoints: [number, number, number][],
): UiState {
  const tracked: TrackedCommand = {
    assetId: receipt.asset_id,
    txId: receipt.tx_id,
    robotId,
    waypoints,
    phase: 'submitted',
  };
  return { ...state, commands: [...state.commands, tracked] };
}

/** Sync tracked commands against the command assets read from the ledger. */
export function applyCommandAssets(state: UiState, assets: CommandAsset[]): UiState {
  const byId = new Map(assets.map((a) => [a.asset_id, a.status]));
  const phaseFor = (cmd: TrackedCommand, status: CommandStatus | undefined) => {
    if (status === 'executing') return 'executing';
    if (status === 'done') return 'done';
    return cmd.phase;
  };
  const commands = state.commands.map((cmd): TrackedCommand => {
    if (cmd.phase === 'failed') {
      return cmd;
    }
    return { ...cmd, phase: phaseFor(cmd, byId.get(cmd.assetId)) };
  });
  return { ...state, commands };
}

export class Store {
  state: UiState = initialState();
  private listeners: ((state: UiState) => void)[] = [];

  update(fn: (state: UiState) => UiState): void {
    this.state = fn(this.state);
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  subscribe(listener: (state: UiState) => void): void {
    this.listeners.push(listener);
  }
}
