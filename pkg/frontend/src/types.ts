// Shapes mirror the gateway JSON exactly: snake_case fields, meters for
// coordinates, nanosecond stamps as strings.

export type ContractName = 'path' | 'object' | 'command';

export interface PathAsset {
  asset_id: string;
  robot_id: string;
  x: number;
  y: number;
  z: number;
  yaw: number;
  stamp: string;
  owner_org: string;
}

export interface ObjectAsset {
  asset_id: string;
  label: string;
  x: number;
  y: number;
  z: number;
  robot_id: string;
  confidence: number;
  stamp: string;
  owner_org: string;
}

export type CommandStatus = 'pending' | 'executing' | 'done';

export interface CommandAsset {
  asset_id: string;
  robot_id: string;
  waypoints: [number, number, number][];
  issued_by: string;
  status: CommandStatus;
  stamp: string;
  owner_org: string;
}

export type Asset = PathAsset | ObjectAsset | CommandAsset;

export interface RobotInfo {
  robot_id: string;
  kind: string;
}

export interface WorldSpec {
  width: number;
  height: number;
  shelves: { x1: number; y1: number; x2: number; y2: number; labels: string[] }[];
  objects: { key: string; label: string; x: number; y: number; z: number }[];
}

export interface TrajectoryPoint {
  stamp: string;
  x: number;
  y: number;
  z: number;
}

export interface PoseEvent {
  robot_id: string;
  x: number;
  y: number;
  z: number;
  yaw: number;
  stamp: string;
}

export interface CommitEvent {
  channel: string;
  block_no: number;
  tx_id: string;
  validation_code: string;
}

export interface CommandReceipt {
  asset_id: string;
  tx_id: string;
}
