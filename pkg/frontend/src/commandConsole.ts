// Command flow: collect clicked waypoints, submit through the gateway,
// then follow the status through commit -> executing -> done.

import type { HttpGateway } from './api.js';
import { Store, trackCommand } from './store.js';
import type { CommandAsset } from './types.js';

export const DEFAULT_GROUND_Z = 0.0;
export const DEFAULT_AERIAL_Z = 1.5;

export class CommandFlow {
  draft: [number, number, number][] = [];
  selectedRobot: string | null = null;

  constructor(
    private readonly gateway: Pick<HttpGateway, 'postCommand' | 'assets'>,
    private readonly store: Store,
  ) {}

  selectRobot(robotId: string): void {
    this.selectedRobot = robotId;
  }

  addWaypoint(x: number, y: number, aerial: boolean): void {
    const z = aerial ? DEFAULT_AERIAL_Z : DEFAULT_GROUND_Z;
    this.draft = [...this.draft, [x, y, z]];
  }

  clearDraft(): void {
    this.draft = [];
  }

  /** The submit button stays disabled without a robot and waypoints. */
  canSubmit(): boolean {
    return this.selectedRobot !== null && this.draft.length > 0;
  }

  async submit(): Promise<string> {
    if (!this.canSubmit()) {
      throw new Error('pick a robot and at least one waypoint first');
    }
    const robotId = this.selectedRobot as string;
    const waypoints = this.draft;
    const receipt = await this.gateway.postCommand(robotId, waypoints);
    this.draft = [];
    this.store.update((s) => trackCommand(s, receipt, robotId, waypoints));
    return receipt.tx_id;
  }

  /** Poll the command contract and sync tracked statuses. */
  async refreshStatuses(channel: string): Promise<void> {
    const assets = (await this.gateway.assets(channel, 'command')) as CommandAsset[];
    const { applyCommandAssets } = await import('./store.js');
    this.store.update((s) => applyCommandAssets(s, assets));
  }
}
